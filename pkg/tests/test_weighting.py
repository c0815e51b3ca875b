import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import minimize
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from covbalance.stats import FixedFactor
from covbalance.weighting import (
    CovState,
    CovVariant,
    CovWeighting,
    EqualWeighting,
    GradNormWeighting,
    LossObservation,
    MGDAWeighting,
    StaticWeighting,
    UncertaintyWeighting,
    WeightVector,
    cov_observe,
    equal_weights,
    frank_wolfe_min_norm,
    gradnorm_weights,
    loss_ratio,
    mgda_weights,
    min_norm_point,
    min_norm_two,
    normalize_scores,
    static_weights,
    uncertainty_objective,
    uncertainty_weights,
)

ORACLES = Path(__file__).parent / "oracles"
COV_REF = json.loads((ORACLES / "cov_reference.json").read_text())
VARIANTS = [v.value for v in CovVariant]


# containers ----------------------------------------------------------------


def test_weight_vector_validation():
    with pytest.raises(ValueError):
        WeightVector(np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        WeightVector(np.array([1.5, -0.5]))
    with pytest.raises(ValueError):
        WeightVector(np.array([np.nan, 1.0]), normalized=False)
    with pytest.raises(ValueError):
        WeightVector(np.array([]))
    wv = WeightVector(np.array([2.0, 6.0]), normalized=False)
    assert wv.as_normalized().weights.tolist() == [0.25, 0.75]
    with pytest.raises(ValueError):
        wv.weights[0] = 1.0


def test_loss_observation_validation():
    with pytest.raises(ValueError):
        LossObservation(np.array([1.0, -0.1]))
    with pytest.raises(ValueError):
        LossObservation(np.array([1.0, np.inf]))
    with pytest.raises(ValueError):
        LossObservation(np.array([1.0, 2.0]), gradients=np.ones((3, 2)))
    with pytest.raises(ValueError):
        LossObservation(np.array([1.0]), step=0)


# equal and static -----------------------------------------------------------


@pytest.mark.parametrize("n", [1, 3, 4])
def test_equal_weights(n):
    assert equal_weights(n).weights.tolist() == [1.0 / n] * n


def test_equal_weights_needs_a_loss():
    with pytest.raises(ValueError):
        equal_weights(0)


@pytest.mark.parametrize(
    "raw, expected",
    [
        ([0.15, 0.85, 1.0, 0.1], [0.15 / 2.1, 0.85 / 2.1, 1.0 / 2.1, 0.1 / 2.1]),
        ([1.0, 0.2, 0.2], [5 / 7, 1 / 7, 1 / 7]),
        ([2, 2], [0.5, 0.5]),
    ],
)
def test_static_weights(raw, expected):
    np.testing.assert_allclose(static_weights(raw).weights, expected, rtol=1e-12)


@pytest.mark.parametrize("raw", [[1.0, 0.0], [1.0, -2.0], [], [1.0, np.nan]])
def test_static_weights_rejects(raw):
    with pytest.raises(ValueError):
        static_weights(raw)


def test_static_strategy_count_mismatch():
    with pytest.raises(ValueError):
        StaticWeighting(weights=[1.0, 2.0]).observe([1.0, 1.0, 1.0])
    assert StaticWeighting().observe([3.0, 1.0]).weights.tolist() == [0.5, 0.5]


def test_normalize_scores_all_zero_falls_back():
    assert normalize_scores([0.0, 0.0, 0.0]).weights.tolist() == [1 / 3] * 3


# cov weighting --------------------------------------------------------------


def test_hand_trace_matches_exact_reference():
    expected = [float(Fraction(x)) for x in COV_REF["hand_trace"]]
    assert expected == [0.55, 0.45]
    traj = CovWeighting().fit_transform([[10.0, 1.0], [8.0, 1.2]])
    np.testing.assert_allclose(traj[0], [0.5, 0.5], rtol=0, atol=0)
    np.testing.assert_allclose(traj[1], expected, rtol=0, atol=1e-12)


@pytest.mark.parametrize("stream", ["decaying", "with_zero"])
@pytest.mark.parametrize("variant", VARIANTS)
def test_matches_batch_reference(stream, variant):
    from importlib.util import module_from_spec, spec_from_file_location

    spec = spec_from_file_location("cov_reference", ORACLES / "cov_reference.py")
    ref = module_from_spec(spec)
    spec.loader.exec_module(ref)
    traj = CovWeighting(variant=variant).fit_transform(np.array(ref.STREAMS[stream]))
    np.testing.assert_allclose(traj, COV_REF[stream][variant], rtol=0, atol=1e-12)


def test_loss_ratio_rules():
    assert loss_ratio(3.0, None) == 1.0
    assert loss_ratio(3.0, 0.0) == 1.0
    assert loss_ratio(0.0, 0.0) == 1.0
    assert loss_ratio(3.0, 2.0) == 1.5


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("decay", ["full", 20])
def test_constant_streams_give_equal_weights_exactly(variant, decay):
    rows = np.tile([0.1, 7.0, 1e-4, 3.3], (500, 1))
    traj = CovWeighting(variant=variant, decay=decay).fit_transform(rows)
    assert np.all(traj == 0.25)


def test_state_invariants_and_functional_form():
    state = CovState(3, CovVariant.RATIO, FixedFactor(20))
    for row in ([1.0, 2.0, 3.0], [0.5, 2.5, 3.0], [0.7, 1.0, 2.0]):
        state, wv = cov_observe(state, row)
    counts = {a.step_count for a in state.loss_stats + state.ratio_stats}
    assert counts == {3}
    assert wv.normalized and abs(wv.weights.sum() - 1) < 1e-12


def test_cov_rejects_bad_inputs():
    with pytest.raises(ValueError):
        CovWeighting().observe([1.0, -1.0])
    with pytest.raises(ValueError, match="ratio_inverse"):
        CovWeighting(variant="inverse").observe([1.0, 1.0])
    with pytest.raises(ValueError):
        CovWeighting(decay=0.5).observe([1.0, 1.0])
    strat = CovWeighting()
    strat.observe([1.0, 2.0])
    with pytest.raises(ValueError):
        strat.observe([1.0, 2.0, 3.0])


def test_decay_changes_trajectory():
    rng = np.random.default_rng(0)
    rows = np.abs(rng.standard_normal((200, 3))) + 0.1
    full = CovWeighting(decay="full").fit_transform(rows)
    fast = CovWeighting(decay=20).fit_transform(rows)
    np.testing.assert_array_equal(full[0], fast[0])
    assert np.abs(full - fast).max() > 1e-3


positive_rows = arrays(np.float64, (40, 3), elements=st.floats(1e-3, 1e3))


@settings(max_examples=60, deadline=None)
@given(positive_rows, st.integers(0, 2), st.sampled_from([1e-6, 1e-2, 7.0, 1e3]))
def test_scale_invariance(rows, which, c):
    scaled = rows.copy()
    scaled[:, which] *= c
    for variant in ("ratio", "ratio_inverse", "loss"):
        a = CovWeighting(variant=variant).fit_transform(rows)
        b = CovWeighting(variant=variant).fit_transform(scaled)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)


def test_scaled_quadratic_pair_keeps_ratio_weights_equal():
    # loss2 = 100 * loss1 at every point, as for A2 = 10 * A1
    rng = np.random.default_rng(3)
    l1 = np.abs(rng.standard_normal(300)) + 0.01
    traj = CovWeighting().fit_transform(np.column_stack([l1, 100.0 * l1]))
    np.testing.assert_allclose(traj, 0.5, rtol=0, atol=1e-9)


def test_inverse_variant_prefers_steady_losses():
    rng = np.random.default_rng(1)
    steady = 1.0 + 0.01 * rng.standard_normal(300)
    noisy = 1.0 + 0.3 * rng.standard_normal(300)
    rows = np.abs(np.column_stack([steady, noisy]))
    assert CovWeighting(variant="ratio").fit(rows).weights_[1] > 0.5
    assert CovWeighting(variant="ratio_inverse").fit(rows).weights_[0] > 0.5


# uncertainty ----------------------------------------------------------------


def test_uncertainty_unit_variance():
    value, grad = uncertainty_objective([0.0, 0.0], [3.0, 5.0])
    assert value == 4.0
    np.testing.assert_array_equal(uncertainty_weights([0.0, 0.0]).weights, [0.5, 0.5])
    np.testing.assert_array_equal(grad, [-1.0, -2.0])


@pytest.mark.parametrize("L", [1e-3, 1.0, 2.0, 1e3])
def test_uncertainty_stationary_point(L):
    s = math.log(L)
    _, grad = uncertainty_objective([s], [L])
    assert abs(grad[0]) < 1e-10
    assert uncertainty_weights([s]).weights[0] * L == pytest.approx(0.5, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(1e-3, 1e3))
def test_uncertainty_gradient_matches_fd(s, L):
    h = 1e-5
    _, g = uncertainty_objective([s], [L])
    fd = (uncertainty_objective([s + h], [L])[0] - uncertainty_objective([s - h], [L])[0]) / (2 * h)
    assert g[0] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_uncertainty_strategy_is_unnormalized():
    strat = UncertaintyWeighting(init_log_var=math.log(2.0))
    wv = strat.observe([2.0, 4.0])
    assert not wv.normalized
    np.testing.assert_allclose(wv.weights, [0.25, 0.25])
    assert strat.log_var_grad_[0] == pytest.approx(0.0, abs=1e-15)
    strat.set_log_vars([0.0, 0.0])
    assert strat.observe([2.0, 4.0]).weights.tolist() == [0.5, 0.5]
    with pytest.raises(ValueError):
        strat.set_log_vars([0.0])
    with pytest.raises(ValueError):
        strat.observe([0.0, 1.0])


# gradnorm -------------------------------------------------------------------


def test_gradnorm_documented_examples():
    w = gradnorm_weights([0.5, 1.0], [1.0, 1.0], [2.0, 1.0], temperature=1.0).weights
    np.testing.assert_allclose(w, [0.2, 0.8], rtol=0, atol=1e-12)
    w = gradnorm_weights([0.25, 1.0], [1.0, 1.0], [1.0, 1.0], temperature=1.5).weights
    np.testing.assert_allclose(w, [1 / 9, 8 / 9], rtol=0, atol=1e-12)
    for t in (0.5, 1.0, 1.5, 4.0):
        w = gradnorm_weights([2.0] * 3, [3.0] * 3, [0.7] * 3, temperature=t).weights
        np.testing.assert_allclose(w, [1 / 3] * 3, rtol=0, atol=1e-12)


def test_gradnorm_errors():
    with pytest.raises(ValueError):
        gradnorm_weights([1.0, 1.0], [1.0, 1.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        gradnorm_weights([1.0], [1.0], [1.0], temperature=0.0)
    with pytest.raises(ValueError):
        GradNormWeighting().observe([1.0, 1.0])


def test_gradnorm_first_step_captures_initial_losses():
    strat = GradNormWeighting()
    g = np.array([[1.0, 0.0], [0.0, 2.0]])
    assert strat.observe([4.0, 2.0], g).weights.tolist() == [0.5, 0.5]
    np.testing.assert_array_equal(strat.initial_losses_, [4.0, 2.0])
    w = strat.observe([1.0, 2.0], g).weights
    raw = np.array([0.25 / 1.0, 1.0 / 2.0]) ** 1.5
    np.testing.assert_allclose(w, raw / raw.sum(), rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    arrays(np.float64, 4, elements=st.floats(0.1, 10)),
    arrays(np.float64, 4, elements=st.floats(0.1, 10)),
    st.integers(0, 3),
    st.floats(1.01, 3.0),
    st.floats(0.5, 2.0),
)
def test_gradnorm_monotone_in_loss_ratio(losses, norms, i, bump, t):
    before = gradnorm_weights(losses, np.ones(4), norms, t).weights[i]
    raised = losses.copy()
    raised[i] *= bump
    after = gradnorm_weights(raised, np.ones(4), norms, t).weights[i]
    assert after > before


# mgda -----------------------------------------------------------------------


def test_mgda_examples():
    np.testing.assert_allclose(mgda_weights([[1.0, 0.0], [0.0, 1.0]]).weights, [0.5, 0.5])
    np.testing.assert_allclose(min_norm_point([[1.0, 0.0], [0.0, 1.0]]), [0.5, 0.5])
    assert mgda_weights([[1.0, 0.0], [2.0, 0.0]]).weights.tolist() == [1.0, 0.0]
    assert mgda_weights([[3.0, -1.0]]).weights.tolist() == [1.0]
    assert mgda_weights([[1.0, 2.0]] * 3).weights.tolist() == [1 / 3] * 3


def test_mgda_dimension_mismatch():
    with pytest.raises(ValueError):
        mgda_weights([np.ones(2), np.ones(3)])
    with pytest.raises(ValueError):
        MGDAWeighting().observe([1.0, 1.0])


def test_mgda_orthogonal_three():
    w = mgda_weights(np.eye(3)).weights
    np.testing.assert_allclose(w, [1 / 3] * 3, atol=1e-12)


def slsqp_min_norm(G):
    """Independent solver for the same simplex QP."""
    n = G.shape[0]
    res = minimize(
        lambda a: a @ G @ a,
        np.full(n, 1.0 / n),
        jac=lambda a: 2 * G @ a,
        bounds=[(0, 1)] * n,
        constraints=[{"type": "eq", "fun": lambda a: a.sum() - 1, "jac": lambda a: np.ones(n)}],
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 500},
    )
    return res.fun


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 5), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_mgda_matches_qp_solver(n, dim, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, dim)) * rng.uniform(0.1, 10, (n, 1))
    w = mgda_weights(g).weights
    value = float(np.sum((w @ g) ** 2))
    assert value <= slsqp_min_norm(g @ g.T) + 1e-7 * max(1.0, float(np.max(np.sum(g * g, 1))))


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (2, 5), elements=st.floats(-10, 10)))
def test_two_gradient_closed_form_equals_frank_wolfe(g):
    if np.all(g[0] == g[1]):
        return
    closed = min_norm_two(g[0], g[1]).weights
    fw, _ = frank_wolfe_min_norm(g @ g.T)
    n_closed = np.linalg.norm(closed @ g)
    n_fw = np.linalg.norm(fw @ g)
    assert abs(n_closed - n_fw) <= 1e-8 * max(1.0, np.abs(g).max())


def test_frank_wolfe_respects_iteration_cap():
    rng = np.random.default_rng(0)
    g = rng.standard_normal((5, 8))
    alpha, it = frank_wolfe_min_norm(g @ g.T, max_iter=1)
    assert it == 1 and abs(alpha.sum() - 1) < 1e-12 and np.all(alpha >= 0)


# estimator api --------------------------------------------------------------


ALL = [
    EqualWeighting(),
    StaticWeighting(weights=[1.0, 2.0, 3.0]),
    CovWeighting(variant="loss_inverse", decay=20),
    UncertaintyWeighting(init_log_var=0.5),
    GradNormWeighting(temperature=2.0),
    MGDAWeighting(max_iter=50),
]


@pytest.mark.parametrize("strategy", ALL, ids=lambda s: type(s).__name__)
def test_estimator_contract(strategy):
    fresh = clone(strategy)
    assert fresh.get_params() == strategy.get_params()
    with pytest.raises(NotFittedError):
        fresh.current_weights
    rng = np.random.default_rng(0)
    X = np.abs(rng.standard_normal((6, 3))) + 0.1
    G = rng.standard_normal((6, 3, 4))
    traj = fresh.fit_transform(X, gradients=G)
    assert traj.shape == (6, 3)
    assert fresh.n_steps_ == 6
    np.testing.assert_array_equal(fresh.current_weights.weights, traj[-1])
    again = clone(strategy).fit(X, gradients=G)
    np.testing.assert_array_equal(again.weights_, traj[-1])
    fresh.reset()
    assert not hasattr(fresh, "n_steps_")


def test_set_params_round_trip():
    strat = CovWeighting().set_params(variant="loss", decay=100)
    assert strat.get_params() == {"variant": "loss", "decay": 100}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_normalized_outputs_sum_to_one(seed, n):
    rng = np.random.default_rng(seed)
    scale = 10.0 ** rng.uniform(-6, 6, n)
    for strategy in ALL:
        if isinstance(strategy, StaticWeighting) and n != 3:
            continue
        strat = clone(strategy)
        for t in range(60):
            losses = scale * (np.abs(rng.standard_normal(n)) + 1e-6) * (0.0 if t % 17 == 5 else 1.0) + 1e-9
            wv = strat.observe(losses, rng.standard_normal((n, 3)))
            w = wv.as_normalized().weights
            assert np.all(w >= 0) and abs(w.sum() - 1) <= 1e-9
