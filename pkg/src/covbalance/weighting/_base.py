"""Shared types and the estimator base class for loss-weighting strategies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from covbalance.validation import check_gradients, check_losses

NORMALIZATION_ATOL = 1e-9


@dataclass(frozen=True)
class WeightVector:
    """Per-loss combination coefficients.

    ``normalized`` vectors sum to one; the unnormalized case exists for
    uncertainty weighting, whose weights are free to drift.
    """

    weights: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-D array")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError(f"weights must be finite and non-negative, got {w}")
        if self.normalized and abs(w.sum() - 1.0) > NORMALIZATION_ATOL:
            raise ValueError(f"normalized weights must sum to 1, got {w.sum()!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    def __iter__(self):
        return iter(self.weights)

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)

    def as_normalized(self) -> "WeightVector":
        if self.normalized:
            return self
        total = self.weights.sum()
        if total <= 0:
            return equal_weights(len(self))
        return WeightVector(self.weights / total, normalized=True)


@dataclass(frozen=True)
class LossObservation:
    """Loss values (and optionally per-loss gradients) seen at one step."""

    losses: np.ndarray
    gradients: Optional[np.ndarray] = None
    step: int = 1

    def __post_init__(self):
        losses = check_losses(self.losses)
        object.__setattr__(self, "losses", losses)
        if self.gradients is not None:
            object.__setattr__(self, "gradients", check_gradients(self.gradients, losses.size))
        if int(self.step) < 1:
            raise ValueError(f"step must be a positive integer, got {self.step}")

    @property
    def n_losses(self) -> int:
        return self.losses.size


def equal_weights(n: int) -> WeightVector:
    """Uniform weights ``1/n``."""
    n = int(n)
    if n < 1:
        raise ValueError(f"need at least one loss, got n={n}")
    return WeightVector(np.full(n, 1.0 / n), normalized=True)


def normalize_scores(scores) -> WeightVector:
    """Divide non-negative scores by their sum; all-zero scores give equal weights."""
    scores = np.asarray(scores, dtype=float)
    total = scores.sum()
    if not total > 0 or not np.isfinite(total):
        return equal_weights(scores.size)
    return WeightVector(scores / total, normalized=True)


class LossWeighting(BaseEstimator):
    """Base class: observe per-step losses, emit a :class:`WeightVector`.

    Strategies are online estimators. ``partial_fit`` consumes one step (a
    1-D loss vector) or several consecutive steps (a 2-D array, rows in
    time order); ``fit`` resets state first. After fitting, ``weights_``
    holds the most recent weights and ``n_steps_`` the number of steps seen.
    """

    requires_gradients = False
    normalized = True

    def _check_params(self):
        """Hook for hyper-parameter validation; raises ``ValueError``."""

    def _init_state(self, n_losses):
        raise NotImplementedError

    def _update(self, losses, gradients):
        raise NotImplementedError

    def reset(self, n_losses=None):
        """Drop all accumulated statistics."""
        self._check_params()
        for attr in [a for a in vars(self) if a.endswith("_") and not a.startswith("__")]:
            delattr(self, attr)
        if n_losses is not None:
            self._start(int(n_losses))
        return self

    def _start(self, n_losses):
        if n_losses < 1:
            raise ValueError("need at least one loss")
        self.n_losses_ = n_losses
        self.n_steps_ = 0
        self._init_state(n_losses)

    def observe(self, observation, gradients=None) -> WeightVector:
        """Consume one step and return the weights to use for that step."""
        if not isinstance(observation, LossObservation):
            observation = LossObservation(np.asarray(observation, dtype=float), gradients)
        if not hasattr(self, "n_losses_"):
            self._check_params()
            self._start(observation.n_losses)
        elif observation.n_losses != self.n_losses_:
            raise ValueError(f"expected {self.n_losses_} losses, got {observation.n_losses}")
        if self.requires_gradients and observation.gradients is None:
            raise ValueError(f"{type(self).__name__} needs per-loss gradients")
        self.n_steps_ += 1
        wv = self._update(observation.losses, observation.gradients)
        self.weights_ = wv.weights
        return wv

    def partial_fit(self, X, y=None, gradients=None):
        X = np.asarray(X, dtype=float)
        rows = X[None, :] if X.ndim == 1 else X
        if gradients is not None:
            gradients = np.asarray(gradients, dtype=float)
            if X.ndim == 1:
                gradients = gradients[None]
            if gradients.shape[0] != rows.shape[0]:
                raise ValueError("need one gradient set per loss row")
        for i, row in enumerate(rows):
            self.observe(row, None if gradients is None else gradients[i])
        return self

    def fit(self, X, y=None, gradients=None):
        self.reset()
        return self.partial_fit(X, gradients=gradients)

    def fit_transform(self, X, y=None, gradients=None):
        """Reset, replay the loss history ``X`` and return the weight trajectory."""
        self.reset()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty_like(X)
        for i, row in enumerate(X):
            out[i] = self.observe(row, None if gradients is None else gradients[i]).weights
        return out

    @property
    def current_weights(self) -> WeightVector:
        check_is_fitted(self, "weights_")
        return WeightVector(self.weights_, normalized=self.normalized)
