from __future__ import annotations

import numpy as np

from covbalance.problems.base import Problem, problem_rng


def huber(r, delta=1.0):
    a = np.abs(r)
    return np.where(a <= delta, 0.5 * r * r, delta * (a - 0.5 * delta))


def huber_grad(r, delta=1.0):
    return np.clip(r, -delta, delta)


class MixedNormRegression(Problem):
    """Linear regression scored by two heterogeneous losses on the same residual.

    ``l2 = ||r||^2 / n`` and ``huber = mean(huber(r_i, delta))`` with
    ``r = design @ x - targets``. When ``noise > 0`` and an rng is given,
    every evaluation perturbs the targets with fresh Gaussian noise.
    """

    def __init__(self, design, targets, noise=0.0, delta=1.0, optimum=None):
        X = np.atleast_2d(np.asarray(design, dtype=float))
        y = np.asarray(targets, dtype=float)
        if y.shape != (X.shape[0],):
            raise ValueError(f"targets must have shape ({X.shape[0]},), got {y.shape}")
        if not noise >= 0 or not delta > 0:
            raise ValueError("noise must be >= 0 and delta > 0")
        self.design = X
        self.targets = y
        self.noise = float(noise)
        self.delta = float(delta)
        self.parameter_dim = X.shape[1]
        self.loss_names = ["l2", "huber"]
        self.optimum = None if optimum is None else np.asarray(optimum, dtype=float)

    @classmethod
    def random(cls, n_samples=32, dim=4, noise=0.1, delta=1.0, seed=0):
        """Well-posed instance with exact targets at a random ``x*``."""
        rng = problem_rng(seed)
        X = rng.standard_normal((n_samples, dim))
        x_star = rng.standard_normal(dim)
        return cls(X, X @ x_star, noise=noise, delta=delta, optimum=x_star)

    def draw(self, rng, step=1):
        if rng is None or self.noise == 0.0:
            return self.targets
        return self.targets + self.noise * rng.standard_normal(self.targets.size)

    def evaluate_sample(self, params, sample, scale=0):
        n = self.targets.size
        r = self.design @ params - sample
        losses = np.array([r @ r / n, huber(r, self.delta).mean()])
        grads = np.stack([2.0 * self.design.T @ r / n, self.design.T @ huber_grad(r, self.delta) / n])
        return losses, grads

    def initial_params(self, rng=None):
        if rng is None:
            return np.zeros(self.parameter_dim)
        return rng.standard_normal(self.parameter_dim)
