"""Closed-form GradNorm weights.

Instead of learning the weights with a separate loss, use the optimum of
that loss directly: weight proportional to the relative training rate
``L(t)/L(0)`` divided by the loss's gradient norm, raised to a temperature
exponent and normalized.
"""

from __future__ import annotations

import numpy as np

from covbalance.validation import check_losses
from covbalance.weighting._base import LossWeighting, WeightVector, equal_weights

DEFAULT_TEMPERATURE = 1.5


def gradnorm_weights(losses, initial_losses, grad_norms, temperature=DEFAULT_TEMPERATURE) -> WeightVector:
    losses = check_losses(losses, positive=True)
    initial = check_losses(initial_losses, losses.size, positive=True, name="initial losses")
    norms = check_losses(grad_norms, losses.size, name="gradient norms")
    if np.any(norms == 0):
        raise ValueError("zero gradient norm: relative training rate per unit gradient is undefined")
    if not (np.isfinite(temperature) and temperature > 0):
        raise ValueError(f"temperature must be > 0, got {temperature!r}")
    raw = (losses / initial) / norms
    scores = raw**temperature
    return WeightVector(scores / scores.sum(), normalized=True)


class GradNormWeighting(LossWeighting):
    """GradNorm's optimal weights computed from the current gradients.

    Gradient norms are taken over the full shared-parameter gradient of
    each loss. The first observed step records ``L(0)`` and returns equal
    weights.

    Parameters
    ----------
    temperature : float, default=1.5
        Exponent applied to the raw scores before normalization.
    """

    requires_gradients = True

    def __init__(self, temperature=DEFAULT_TEMPERATURE):
        self.temperature = temperature

    def _check_params(self):
        t = float(self.temperature)
        if not (np.isfinite(t) and t > 0):
            raise ValueError(f"temperature must be > 0, got {self.temperature!r}")

    def _init_state(self, n_losses):
        self.initial_losses_ = None

    def _update(self, losses, gradients):
        if self.initial_losses_ is None:
            self.initial_losses_ = check_losses(losses, positive=True, name="initial losses").copy()
            return equal_weights(losses.size)
        self.grad_norms_ = np.linalg.norm(gradients, axis=1)
        return gradnorm_weights(losses, self.initial_losses_, self.grad_norms_, float(self.temperature))
