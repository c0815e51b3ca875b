import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covbalance.stats import (
    EmptyAccumulatorError,
    FixedFactor,
    FullHistory,
    InvalidObservationError,
    WelfordAccumulator,
    parse_decay,
    std,
    update,
)


def feed(values, decay=None):
    acc = WelfordAccumulator(decay)
    for v in values:
        update(acc, v)
    return acc


@pytest.mark.parametrize(
    "stream, mean, m",
    [([1, 2], 1.5, 0.25), ([1, 2, 3], 2.0, 2 / 3), ([5], 5.0, 0.0)],
)
def test_known_streams(stream, mean, m):
    acc = feed(stream)
    assert acc.mean == pytest.approx(mean, rel=1e-12)
    assert acc.second_moment == pytest.approx(m, rel=1e-12, abs=0)
    assert acc.step_count == len(stream)


@pytest.mark.parametrize("stream, expected", [([1, 2], 0.5), ([3.3, 3.3, 3.3], 0.0), ([0, 2], 1.0)])
def test_std_examples(stream, expected):
    assert std(feed(stream)) == pytest.approx(expected, abs=1e-15)


def test_empty_accumulator_rejects_queries():
    acc = WelfordAccumulator()
    with pytest.raises(EmptyAccumulatorError):
        acc.mean
    with pytest.raises(EmptyAccumulatorError):
        acc.second_moment
    with pytest.raises(EmptyAccumulatorError):
        acc.std()


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_rejected_without_side_effects(bad):
    acc = feed([1.0, 2.0])
    with pytest.raises(InvalidObservationError):
        acc.update(bad)
    assert acc.step_count == 2 and acc.mean == 1.5


def test_parse_decay():
    assert parse_decay(None) == FullHistory()
    assert parse_decay("full") == FullHistory()
    assert parse_decay(20) == FixedFactor(20.0)
    assert parse_decay("100") == FixedFactor(100.0)
    spec = FixedFactor(3.0)
    assert parse_decay(spec) is spec
    for bad in ("fast", 1, 0.5, -3, math.inf):
        with pytest.raises(ValueError):
            parse_decay(bad)


def test_copy_is_independent():
    acc = feed([1.0, 4.0])
    twin = acc.copy()
    twin.update(10.0)
    assert acc.step_count == 2 and twin.step_count == 3
    assert acc.mean == 2.5


streams = st.lists(st.floats(1e-8, 1e8), min_size=1, max_size=300)


@settings(max_examples=200, deadline=None)
@given(streams)
def test_full_history_matches_batch(values):
    acc = feed(values)
    x = np.array(values)
    assert acc.mean == pytest.approx(x.mean(), rel=1e-9)
    assert acc.second_moment == pytest.approx(x.var(), rel=1e-9, abs=1e-9 * x.mean() ** 2)
    assert acc.second_moment >= 0


@settings(max_examples=100, deadline=None)
@given(streams, st.sampled_from([1e-6, 0.37, 3.0, 1e3]))
def test_scaling_stream_scales_mean_and_std(values, c):
    a, b = feed(values), feed([c * v for v in values])
    assert b.mean == pytest.approx(c * a.mean, rel=1e-12)
    assert b.std() == pytest.approx(c * a.std(), rel=1e-9, abs=1e-12 * c * a.mean)


def ema_oracle(values, t):
    mean = values[0]
    for x in values[1:]:
        mean = mean + (x - mean) / t
    return mean


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=200), st.sampled_from([1.5, 20.0, 100.0]))
def test_fixed_factor_is_an_ema(values, t):
    acc = feed(values, FixedFactor(t))
    assert acc.mean == pytest.approx(ema_oracle(values, t), rel=1e-12, abs=1e-9)
    assert acc.second_moment >= 0


def test_fixed_factor_first_two_steps():
    # second update weights the new point by 1/t, not 1/2
    acc = feed([0.0, 10.0], FixedFactor(20))
    assert acc.mean == pytest.approx(0.5)
    assert acc.second_moment == pytest.approx((1 / 20) * 10 * 9.5)


def test_constant_stream_has_exactly_zero_moment():
    for decay in (None, 20):
        acc = feed([0.1] * 1000, decay)
        assert acc.second_moment == 0.0
