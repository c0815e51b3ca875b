from __future__ import annotations

import numpy as np

from covbalance.problems.base import Problem


class SyntheticStreams(Problem):
    """Gradient-free loss streams that decay over steps, independent of parameters.

    ``L_i(t) = level_i * (floor + (1 - floor) * exp(-rate_i * t)) * max(0, 1 + noise_i * z)``.
    With zero rates and zero noise every stream is constant. Only
    strategies that need no gradients can run on this problem.
    """

    has_gradients = False

    def __init__(self, levels=(1.0, 1.0), rates=0.0, noise=0.0, floor=0.1):
        self.levels = np.asarray(levels, dtype=float)
        if self.levels.ndim != 1 or self.levels.size == 0 or np.any(self.levels < 0):
            raise ValueError("levels must be a non-empty list of non-negative values")
        n = self.levels.size
        self.rates = np.broadcast_to(np.asarray(rates, dtype=float), (n,)).copy()
        self.noise = np.broadcast_to(np.asarray(noise, dtype=float), (n,)).copy()
        if np.any(self.rates < 0) or np.any(self.noise < 0):
            raise ValueError("rates and noise must be >= 0")
        if not 0.0 <= floor <= 1.0:
            raise ValueError("floor must lie in [0, 1]")
        self.floor = float(floor)
        self.parameter_dim = 1
        self.loss_names = [f"stream{i}" for i in range(n)]

    def draw(self, rng, step=1):
        if rng is None:
            z = np.zeros(self.levels.size)
        else:
            z = rng.standard_normal(self.levels.size)
        return step, z

    def evaluate_sample(self, params, sample, scale=0):
        step, z = sample
        trend = self.floor + (1.0 - self.floor) * np.exp(-self.rates * step)
        return self.levels * trend * np.maximum(0.0, 1.0 + self.noise * z), None
