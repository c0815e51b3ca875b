from __future__ import annotations

import numpy as np

from covbalance.problems.base import Problem

HEAD_MODES = ("auto", "per_scale", "shared")
#: Smallest image side allowed at the coarsest scale; below this SSIM and
#: shift-consistency losses degenerate.
MIN_COARSE_SIDE = 4


class MultiScaleComposite(Problem):
    """Evaluate every loss of ``base`` at ``scales`` resolutions.

    Losses are ordered scale-major and named ``<base name>_s<scale>``. The
    base's designated losses are multiplied by ``1/2**s`` at scale ``s``;
    every other loss is left as is. One noise draw is shared by all scales
    of a step.

    With a stereo base (4 loss kinds x 2 sides) and 4 scales this gives the
    32-loss structure of a multiscale stereo depth objective.

    Parameters
    ----------
    base : Problem
        Must support scaled evaluation.
    scales : int, default=4
    heads : {"auto", "per_scale", "shared"}, default="auto"
        ``"per_scale"`` gives every scale its own parameters at that scale's
        resolution, like a decoder that emits one prediction per scale; the
        parameter vector is the concatenation of the heads, finest first.
        ``"shared"`` evaluates all scales on one full-resolution parameter
        vector by pooling it. ``"auto"`` picks per-scale heads when the base
        supports them.
    """

    def __init__(self, base: Problem, scales=4, heads="auto"):
        if not getattr(base, "supports_scales", False):
            raise ValueError(f"{type(base).__name__} does not support multiscale evaluation")
        scales = int(scales)
        if scales < 1:
            raise ValueError("scales must be >= 1")
        if heads not in HEAD_MODES:
            raise ValueError(f"unknown heads mode {heads!r}; valid: {', '.join(HEAD_MODES)}")
        if heads == "auto":
            heads = "per_scale" if base.supports_heads else "shared"
        if heads == "per_scale" and not base.supports_heads:
            raise ValueError(f"{type(base).__name__} has no per-scale heads; use heads='shared'")
        if hasattr(base, "head_shape"):
            side = min(base.head_shape(scales - 1))
            if side < MIN_COARSE_SIDE:
                raise ValueError(
                    f"coarsest scale would be {side} pixels wide; need >= {MIN_COARSE_SIDE} "
                    f"(use a larger image or fewer scales)"
                )
        self.base = base
        self.scales = scales
        self.heads = heads
        self.loss_names = [f"{name}_s{s}" for s in range(scales) for name in base.loss_names]
        factors = np.ones((scales, base.loss_count))
        for s in range(scales):
            factors[s, list(base.designated_losses)] = 0.5**s
        self.factors = factors.ravel()
        self.designated_losses = tuple(
            s * base.loss_count + i for s in range(scales) for i in base.designated_losses
        )
        if heads == "shared":
            self.parameter_dim = base.parameter_dim
            self.optimum = base.optimum
        else:
            dims = [base.head_dim(s) for s in range(scales)]
            self.bounds = np.concatenate([[0], np.cumsum(dims)])
            self.parameter_dim = int(self.bounds[-1])
            self.optimum = None
            if base.optimum is not None:
                self.optimum = np.concatenate([base.pool(base.optimum, s) for s in range(scales)])

    def loss_scales(self):
        return [s for s in range(self.scales) for _ in range(self.base.loss_count)]

    def head(self, params, scale):
        """Slice of ``params`` holding the prediction for ``scale``."""
        return params[self.bounds[scale] : self.bounds[scale + 1]]

    def draw(self, rng, step=1):
        return self.base.draw(rng, step)

    def evaluate_sample(self, params, sample, scale=0):
        if scale != 0:
            raise ValueError("a multiscale composite cannot itself be downscaled")
        n = self.base.loss_count
        if self.heads == "shared":
            parts = [self.base.evaluate_sample(params, sample, s) for s in range(self.scales)]
            losses = np.concatenate([p[0] for p in parts])
            grads = np.concatenate([p[1] for p in parts])
        else:
            losses = np.empty(self.loss_count)
            grads = np.zeros((self.loss_count, self.parameter_dim))
            for s in range(self.scales):
                full = self.base.expand(self.head(params, s), s)
                value, g = self.base.evaluate_sample(full, sample, s)
                losses[s * n : (s + 1) * n] = value
                grads[s * n : (s + 1) * n, self.bounds[s] : self.bounds[s + 1]] = self.base.expand_adjoint(g, s)
        return losses * self.factors, grads * self.factors[:, None]

    def initial_params(self, rng=None):
        if self.heads == "shared":
            return self.base.initial_params(rng)
        return np.concatenate([self.base.initial_head(rng, s) for s in range(self.scales)])
