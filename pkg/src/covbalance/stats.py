"""Streaming mean and variance of scalar sequences (Welford's recurrence)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union


class InvalidObservationError(ValueError):
    """Raised when a non-finite value is pushed into an accumulator."""


class EmptyAccumulatorError(RuntimeError):
    """Raised when statistics are queried before the first update."""


@dataclass(frozen=True)
class FullHistory:
    """Every observation seen so far carries equal weight."""

    def factor(self, step: int) -> float:
        return float(step)

    def __str__(self) -> str:
        return "full"


@dataclass(frozen=True)
class FixedFactor:
    """Exponential forgetting: the new observation always gets weight ``1/t``."""

    t: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and self.t > 1):
            raise ValueError(f"decay factor must be a finite real > 1, got {self.t!r}")

    def factor(self, step: int) -> float:
        return float(self.t)

    def __str__(self) -> str:
        return f"{self.t:g}"


DecaySpec = Union[FullHistory, FixedFactor]


def parse_decay(value) -> DecaySpec:
    """Build a decay spec from ``None``, ``"full"``, a number, or an existing spec.

    >>> parse_decay("full")
    FullHistory()
    >>> parse_decay("20")
    FixedFactor(t=20.0)
    """
    if isinstance(value, (FullHistory, FixedFactor)):
        return value
    if value is None:
        return FullHistory()
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("full", "full_history", "none", ""):
            return FullHistory()
        try:
            value = float(text)
        except ValueError:
            raise ValueError(f"unknown decay {value!r}; use 'full' or a number > 1") from None
    return FixedFactor(float(value))


class WelfordAccumulator:
    """Online mean and population second moment of a scalar stream.

    With :class:`FullHistory` the update after ``t`` observations is the
    textbook Welford step; with :class:`FixedFactor` ``t`` is held constant
    and the estimates become exponential moving averages. The first
    observation initialises ``mean = x`` and ``second_moment = 0`` in both
    modes.
    """

    __slots__ = ("decay", "step_count", "_mean", "_m")

    def __init__(self, decay: DecaySpec | None = None):
        self.decay = parse_decay(decay)
        self.step_count = 0
        self._mean = 0.0
        self._m = 0.0

    def __repr__(self) -> str:
        if self.step_count == 0:
            return f"WelfordAccumulator(decay={self.decay}, empty)"
        return (
            f"WelfordAccumulator(decay={self.decay}, n={self.step_count}, "
            f"mean={self._mean!r}, second_moment={self._m!r})"
        )

    def update(self, x: float) -> "WelfordAccumulator":
        x = float(x)
        if not math.isfinite(x):
            raise InvalidObservationError(f"observation must be finite, got {x!r}")
        self.step_count += 1
        if self.step_count == 1:
            self._mean = x
            self._m = 0.0
            return self
        inv_t = 1.0 / self.decay.factor(self.step_count)
        prev_mean = self._mean
        # delta form keeps a constant stream's mean exact
        self._mean = prev_mean + inv_t * (x - prev_mean)
        m = (1.0 - inv_t) * self._m + inv_t * (x - prev_mean) * (x - self._mean)
        self._m = m if m > 0.0 else 0.0
        return self

    def _check_nonempty(self):
        if self.step_count == 0:
            raise EmptyAccumulatorError("accumulator has no observations yet")

    @property
    def mean(self) -> float:
        self._check_nonempty()
        return self._mean

    @property
    def second_moment(self) -> float:
        self._check_nonempty()
        return self._m

    def std(self) -> float:
        return math.sqrt(self.second_moment)

    def copy(self) -> "WelfordAccumulator":
        other = WelfordAccumulator(self.decay)
        other.step_count = self.step_count
        other._mean = self._mean
        other._m = self._m
        return other


def update(acc: WelfordAccumulator, x: float) -> WelfordAccumulator:
    return acc.update(x)


def std(acc: WelfordAccumulator) -> float:
    return acc.std()
