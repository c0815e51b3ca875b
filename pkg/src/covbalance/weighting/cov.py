"""Coefficient-of-variation weighting.

Each loss is turned into a ratio against its own running mean, which puts
losses of very different magnitude on a common scale with a shared zero.
The dispersion of that ratio relative to its mean (the coefficient of
variation) decides how much weight the loss receives: losses that have
stopped moving lose weight, losses that still fluctuate gain it.
"""

from __future__ import annotations

import enum

import numpy as np

from covbalance.stats import WelfordAccumulator, parse_decay
from covbalance.weighting._base import LossWeighting, WeightVector, equal_weights, normalize_scores

#: Floor applied to standard deviations (inverse variants) and means before division.
EPS = 1e-12


class CovVariant(str, enum.Enum):
    RATIO = "ratio"  # sigma_l / mu_l, the default
    LOSS = "loss"  # sigma_L / mu_L
    RATIO_INVERSE = "ratio_inverse"  # mu_l / sigma_l
    LOSS_INVERSE = "loss_inverse"  # mu_L / sigma_L

    @classmethod
    def parse(cls, value) -> "CovVariant":
        try:
            return cls(value)
        except ValueError:
            valid = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown CoV variant {value!r}; valid: {valid}") from None


def loss_ratio(loss: float, previous_mean: float | None) -> float:
    """Current loss over the running mean of the previous losses.

    The first observation has no history and gets ratio 1. A zero mean
    carries no scale information, so it also maps to 1.
    """
    if previous_mean is None or previous_mean == 0.0:
        return 1.0
    return loss / previous_mean


class CovState:
    """Per-loss running statistics: the loss mean and the ratio mean/spread."""

    def __init__(self, n_losses, variant=CovVariant.RATIO, decay=None):
        self.variant = CovVariant.parse(variant)
        self.decay = parse_decay(decay)
        self.loss_stats = [WelfordAccumulator(self.decay) for _ in range(n_losses)]
        self.ratio_stats = [WelfordAccumulator(self.decay) for _ in range(n_losses)]

    @property
    def step_count(self) -> int:
        return self.loss_stats[0].step_count

    def push(self, losses) -> np.ndarray:
        """Update all accumulators with one step of losses; return the ratios used."""
        ratios = np.empty(len(self.loss_stats))
        for i, (L, ls, rs) in enumerate(zip(losses, self.loss_stats, self.ratio_stats)):
            prev = ls.mean if ls.step_count else None
            ratios[i] = loss_ratio(float(L), prev)
            ls.update(L)
            rs.update(ratios[i])
        return ratios

    def scores(self) -> np.ndarray | None:
        """Unnormalized per-loss scores, or ``None`` when no loss shows any spread."""
        stats = self.ratio_stats if self.variant in (CovVariant.RATIO, CovVariant.RATIO_INVERSE) else self.loss_stats
        mu = np.array([s.mean for s in stats])
        sigma = np.array([s.std() for s in stats])
        if not np.any(sigma > 0):
            return None
        if self.variant in (CovVariant.RATIO, CovVariant.LOSS):
            return sigma / np.maximum(mu, EPS)
        return mu / np.maximum(sigma, EPS)

    def weights(self) -> WeightVector:
        scores = self.scores()
        if scores is None:
            return equal_weights(len(self.loss_stats))
        return normalize_scores(scores)


def cov_observe(state: CovState, losses) -> tuple[CovState, WeightVector]:
    """Push one step of losses into ``state`` and return the resulting weights."""
    losses = np.asarray(losses, dtype=float)
    if losses.shape != (len(state.loss_stats),):
        raise ValueError(f"expected {len(state.loss_stats)} losses, got shape {losses.shape}")
    if np.any(losses < 0) or not np.all(np.isfinite(losses)):
        raise ValueError(f"losses must be finite and non-negative, got {losses}")
    state.push(losses)
    return state, state.weights()


class CovWeighting(LossWeighting):
    """Weight losses by the coefficient of variation of their loss ratios.

    Parameters
    ----------
    variant : {"ratio", "loss", "ratio_inverse", "loss_inverse"}, default="ratio"
        Which statistic drives the score. ``"ratio"`` uses the spread of the
        loss ratio over its mean; ``"loss"`` the same on raw loss values;
        the ``*_inverse`` variants use mean over spread instead.
    decay : "full" or float > 1, default="full"
        ``"full"`` keeps statistics over the whole history. A number ``t``
        gives the newest observation weight ``1/t`` (an exponential moving
        average). Applied to every accumulator, including the loss mean
        used as the ratio denominator.

    Attributes
    ----------
    state_ : CovState
        Running statistics.
    ratios_ : ndarray of shape (n_losses,)
        Loss ratios computed at the latest step.
    weights_ : ndarray of shape (n_losses,)
        Latest weights.

    Examples
    --------
    >>> import numpy as np
    >>> w = CovWeighting().fit_transform(np.array([[10.0, 1.0], [8.0, 1.2]]))
    >>> np.round(w[-1], 12).tolist()
    [0.55, 0.45]
    """

    def __init__(self, variant="ratio", decay="full"):
        self.variant = variant
        self.decay = decay

    def _check_params(self):
        CovVariant.parse(self.variant)
        parse_decay(self.decay)

    def _init_state(self, n_losses):
        self.state_ = CovState(n_losses, self.variant, self.decay)

    def _update(self, losses, gradients):
        self.ratios_ = self.state_.push(losses)
        return self.state_.weights()
