"""Homoscedastic uncertainty weighting with learned per-loss log-variances."""

from __future__ import annotations

import numpy as np

from covbalance.validation import check_losses
from covbalance.weighting._base import LossWeighting, WeightVector


def uncertainty_objective(log_vars, losses):
    """Gaussian negative log-likelihood over losses, parametrised by ``s = log sigma^2``.

    Returns the objective ``sum(0.5 * exp(-s) * L + 0.5 * s)`` and its
    gradient with respect to ``s``, ``0.5 * (1 - L * exp(-s))``.
    """
    s = np.asarray(log_vars, dtype=float)
    L = check_losses(losses, s.size, positive=True)
    if not np.all(np.isfinite(s)):
        raise ValueError("log-variances must be finite")
    precision = np.exp(-s)
    value = float(np.sum(0.5 * precision * L + 0.5 * s))
    return value, 0.5 * (1.0 - L * precision)


def uncertainty_weights(log_vars) -> WeightVector:
    """Effective (unnormalized) loss weights ``0.5 * exp(-s)``."""
    return WeightVector(0.5 * np.exp(-np.asarray(log_vars, dtype=float)), normalized=False)


class UncertaintyWeighting(LossWeighting):
    """Learned uncertainty weights.

    ``observe`` evaluates the objective at the current log-variances and
    leaves the gradient in ``log_var_grad_``; whoever owns the optimizer
    steps ``log_vars_`` together with the model parameters. Weights are not
    normalized.

    Parameters
    ----------
    init_log_var : float, default=0.0
        Starting value of every ``s_i``; 0 means unit variance (weight 0.5).
    """

    normalized = False

    def __init__(self, init_log_var=0.0):
        self.init_log_var = init_log_var

    def _check_params(self):
        if not np.isfinite(self.init_log_var):
            raise ValueError("init_log_var must be finite")

    def _init_state(self, n_losses):
        self.log_vars_ = np.full(n_losses, float(self.init_log_var))

    def _update(self, losses, gradients):
        self.objective_, self.log_var_grad_ = uncertainty_objective(self.log_vars_, losses)
        return uncertainty_weights(self.log_vars_)

    def set_log_vars(self, log_vars):
        s = np.asarray(log_vars, dtype=float)
        if s.shape != self.log_vars_.shape or not np.all(np.isfinite(s)):
            raise ValueError("log-variances must be finite and match the loss count")
        self.log_vars_ = s.copy()
