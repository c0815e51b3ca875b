from __future__ import annotations

import numpy as np

from covbalance.problems.base import Problem, problem_rng


def row_pool_matrix(m, factor):
    """Averages consecutive blocks of ``factor`` rows; the last block may be short."""
    blocks = -(-m // factor)
    P = np.zeros((blocks, m))
    for k in range(blocks):
        rows = slice(k * factor, min((k + 1) * factor, m))
        P[k, rows] = 1.0 / (rows.stop - rows.start)
    return P


class QuadraticProblem(Problem):
    """Losses ``||A_i x - b_i||^2 + noise_i`` with exact gradients ``2 A_i^T (A_i x - b_i)``.

    The noise is a non-negative perturbation of the loss *value*
    (``sigma_i * |z|``); gradients are left exact. At scale ``s`` the rows
    of ``A_i`` and ``b_i`` are averaged in blocks of ``2**s``.

    Parameters
    ----------
    specs : list of (A, b, sigma)
    optimum : array-like, optional
        Known minimiser, used for distance-to-optimum.
    names : list of str, optional
    """

    supports_scales = True

    def __init__(self, specs, optimum=None, names=None):
        if not specs:
            raise ValueError("need at least one quadratic loss")
        mats, targets, sigmas = [], [], []
        dim = None
        for i, (A, b, sigma) in enumerate(specs):
            A = np.atleast_2d(np.asarray(A, dtype=float))
            b = np.atleast_1d(np.asarray(b, dtype=float))
            if dim is None:
                dim = A.shape[1]
            if A.shape[1] != dim:
                raise ValueError(f"loss {i}: A has {A.shape[1]} columns, expected {dim}")
            if b.shape != (A.shape[0],):
                raise ValueError(f"loss {i}: b has shape {b.shape}, expected ({A.shape[0]},)")
            if not sigma >= 0:
                raise ValueError(f"loss {i}: noise sigma must be >= 0")
            mats.append(A)
            targets.append(b)
            sigmas.append(float(sigma))
        self.A = mats
        self.b = targets
        self.sigmas = np.array(sigmas)
        self.parameter_dim = dim
        self.loss_names = list(names) if names is not None else [f"q{i}" for i in range(len(specs))]
        if len(self.loss_names) != len(specs):
            raise ValueError("one name per loss required")
        if optimum is not None:
            optimum = np.asarray(optimum, dtype=float)
            if optimum.shape != (dim,):
                raise ValueError(f"optimum must have shape ({dim},)")
        self.optimum = optimum
        self._pooled = {}

    def _at_scale(self, i, scale):
        if scale == 0:
            return self.A[i], self.b[i]
        key = (i, scale)
        if key not in self._pooled:
            P = row_pool_matrix(self.A[i].shape[0], 2**scale)
            self._pooled[key] = (P @ self.A[i], P @ self.b[i])
        return self._pooled[key]

    def draw(self, rng, step=1):
        if rng is None or not np.any(self.sigmas > 0):
            return np.zeros(len(self.A))
        return self.sigmas * np.abs(rng.standard_normal(len(self.A)))

    def evaluate_sample(self, params, sample, scale=0):
        losses = np.empty(len(self.A))
        grads = np.empty((len(self.A), self.parameter_dim))
        for i in range(len(self.A)):
            A, b = self._at_scale(i, scale)
            r = A @ params - b
            losses[i] = r @ r + sample[i]
            grads[i] = 2.0 * (A.T @ r)
        return losses, grads

    def initial_params(self, rng=None):
        if rng is None:
            return np.zeros(self.parameter_dim)
        return rng.standard_normal(self.parameter_dim)


def _random_well_conditioned(rng, rows, dim, lo=1.0, hi=2.0):
    U, _ = np.linalg.qr(rng.standard_normal((rows, rows)))
    V, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    k = min(rows, dim)
    S = np.zeros((rows, dim))
    S[np.arange(k), np.arange(k)] = rng.uniform(lo, hi, k)
    return U @ S @ V.T


def shared_optimum_quadratic(n_losses=2, dim=4, rows=None, noise=0.0, scales=None, seed=0):
    """Quadratics that all vanish at the same random point ``x*``.

    Each ``A_i`` has singular values in ``[1, 2]`` times ``scales[i]`` (default
    1), so any convex combination of the losses is strongly convex.
    """
    if n_losses < 1 or dim < 1:
        raise ValueError("n_losses and dim must be positive")
    rows = dim if rows is None else int(rows)
    if rows < dim:
        raise ValueError("rows must be >= dim for a unique shared optimum")
    scales = np.ones(n_losses) if scales is None else np.asarray(scales, dtype=float)
    if scales.shape != (n_losses,) or np.any(scales <= 0):
        raise ValueError("scales must hold one positive factor per loss")
    noise = np.broadcast_to(np.asarray(noise, dtype=float), (n_losses,))
    rng = problem_rng(seed)
    x_star = rng.standard_normal(dim)
    specs = []
    for i in range(n_losses):
        A = scales[i] * _random_well_conditioned(rng, rows, dim)
        specs.append((A, A @ x_star, noise[i]))
    return QuadraticProblem(specs, optimum=x_star)
