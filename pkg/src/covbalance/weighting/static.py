"""Fixed weights: uniform or hand-tuned."""

import numpy as np

from covbalance.weighting._base import LossWeighting, WeightVector, equal_weights


def static_weights(raw) -> WeightVector:
    """Normalize strictly positive hand-tuned weights to sum to one.

    >>> static_weights([2, 2]).weights.tolist()
    [0.5, 0.5]
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 1 or raw.size == 0:
        raise ValueError("static weights must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(raw)) or np.any(raw <= 0):
        raise ValueError(f"static weights must be finite and > 0, got {raw.tolist()}")
    return WeightVector(raw / raw.sum(), normalized=True)


class EqualWeighting(LossWeighting):
    """Every loss contributes ``1/n``."""

    def _init_state(self, n_losses):
        self.fixed_ = equal_weights(n_losses)

    def _update(self, losses, gradients):
        return self.fixed_


class StaticWeighting(LossWeighting):
    """Hand-tuned constant weights, normalized once.

    Parameters
    ----------
    weights : sequence of float, optional
        Positive raw weights, one per loss. ``None`` means uniform.
    """

    def __init__(self, weights=None):
        self.weights = weights

    def _check_params(self):
        if self.weights is not None:
            static_weights(self.weights)

    def _init_state(self, n_losses):
        if self.weights is None:
            self.fixed_ = equal_weights(n_losses)
            return
        wv = static_weights(self.weights)
        if len(wv) != n_losses:
            raise ValueError(f"{len(wv)} static weights configured for {n_losses} losses")
        self.fixed_ = wv

    def _update(self, losses, gradients):
        return self.fixed_
