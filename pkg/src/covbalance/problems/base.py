from __future__ import annotations

import numpy as np

from covbalance.validation import check_vector
from covbalance.weighting import LossObservation


def problem_rng(seed):
    """Generator for building a problem instance.

    Kept on a separate stream from run seeds, so that a run's random
    starting point never coincides with the problem's hidden optimum.
    """
    return np.random.default_rng([0x5EED, int(seed)])


class NonFiniteLossError(FloatingPointError):
    """A problem produced a NaN/inf loss or gradient."""


class Problem:
    """A differentiable multi-loss objective over a flat parameter vector.

    Subclasses implement :meth:`evaluate_sample`; :meth:`draw` produces the
    per-step randomness (noise) so that composites can share one draw
    across all the sub-losses of a step. ``evaluate`` with ``rng=None`` is
    the noise-free objective.
    """

    loss_names: list
    parameter_dim: int
    optimum = None
    has_gradients = True
    #: Problems that can be re-evaluated at coarser resolutions.
    supports_scales = False
    #: Problems whose scales can each get their own parameters (see ``MultiScaleComposite``).
    supports_heads = False
    #: Indices of losses attenuated by ``1/2**s`` at scale ``s`` in a composite.
    designated_losses: tuple = ()

    @property
    def loss_count(self) -> int:
        return len(self.loss_names)

    def loss_scales(self):
        """Scale index of every loss (all zero unless multiscale)."""
        return [0] * self.loss_count

    def draw(self, rng, step=1):
        return None

    def evaluate_sample(self, params, sample, scale=0):
        raise NotImplementedError

    def evaluate(self, params, rng=None, step=1) -> LossObservation:
        params = check_vector(params, self.parameter_dim)
        # overflow is reported below as NonFiniteLossError, not as a warning
        with np.errstate(over="ignore", invalid="ignore"):
            losses, grads = self.evaluate_sample(params, self.draw(rng, step), 0)
        losses = np.asarray(losses, dtype=float)
        if not np.all(np.isfinite(losses)) or (grads is not None and not np.all(np.isfinite(grads))):
            raise NonFiniteLossError(f"non-finite loss or gradient at step {step}")
        return LossObservation(losses, grads if self.has_gradients else None, step)

    def initial_params(self, rng=None):
        return np.zeros(self.parameter_dim)

    def distance_to_optimum(self, params) -> float:
        if self.optimum is None:
            return float("nan")
        return float(np.linalg.norm(np.asarray(params) - self.optimum))
