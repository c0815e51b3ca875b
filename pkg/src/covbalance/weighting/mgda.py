"""Min-norm point of the convex hull of per-loss gradients.

Solves ``min_a || sum_i a_i g_i ||^2`` over the probability simplex, which
gives the multiple-gradient-descent (Pareto-stationary) combination. Two
gradients have a closed form; more use Frank-Wolfe on the Gram matrix.
"""

from __future__ import annotations

import numpy as np

from covbalance.validation import check_gradients
from covbalance.weighting._base import LossWeighting, WeightVector, equal_weights

MAX_ITER = 250
TOL = 1e-10


def min_norm_two(g1, g2) -> WeightVector:
    """Closed-form weights ``(gamma, 1 - gamma)`` for two gradients."""
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    diff = g1 - g2
    denom = float(diff @ diff)
    if denom == 0.0:
        return equal_weights(2)
    gamma = float(np.clip(((g2 - g1) @ g2) / denom, 0.0, 1.0))
    return WeightVector(np.array([gamma, 1.0 - gamma]))


def _affine_min_norm(G, idx):
    """Minimiser of ``mu^T G mu`` on the affine hull of ``idx`` (``sum(mu) = 1``)."""
    k = idx.size
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = G[np.ix_(idx, idx)]
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    return np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]


def frank_wolfe_min_norm(gram, max_iter=MAX_ITER, tol=TOL):
    """Fully-corrective Frank-Wolfe on ``a^T G a`` over the simplex.

    Each major step adds the vertex picked by the linear minimisation
    oracle, then re-optimises over the active vertices: jump to the affine
    minimiser when it lies inside the simplex, otherwise line-search along
    the segment towards it until a weight hits zero and drop that vertex.
    Stops when the duality gap falls below ``tol * max(diag(G))``; every
    major and minor step counts against ``max_iter``.

    Returns
    -------
    alpha : ndarray of shape (n,)
    n_iter : int
    """
    G = np.asarray(gram, dtype=float)
    n = G.shape[0]
    start = int(np.argmin(np.diag(G)))
    alpha = np.zeros(n)
    alpha[start] = 1.0
    active = [start]
    threshold = tol * max(float(np.max(np.diag(G))), np.finfo(float).tiny)
    it = 0
    while it < max_iter:
        it += 1
        grad = G @ alpha
        s = int(np.argmin(grad))
        if float(alpha @ grad) - grad[s] <= threshold or s in active:
            break
        active.append(s)
        while it < max_iter:
            idx = np.array(active)
            mu = _affine_min_norm(G, idx)
            if np.all(mu > 0):
                alpha[:] = 0.0
                alpha[idx] = mu
                break
            lam = alpha[idx]
            neg = mu <= 0
            theta = float(np.min(lam[neg] / (lam[neg] - mu[neg])))
            lam = lam + theta * (mu - lam)
            lam[lam < 1e-15] = 0.0
            alpha[:] = 0.0
            alpha[idx] = lam
            active = [i for i in active if alpha[i] > 0]
            it += 1
    alpha = np.clip(alpha, 0.0, None)
    return alpha / alpha.sum(), it


def mgda_weights(gradients, max_iter=MAX_ITER, tol=TOL) -> WeightVector:
    """Simplex weights of the min-norm element of the gradients' convex hull."""
    g = check_gradients(gradients)
    n = g.shape[0]
    if n == 1:
        return WeightVector(np.ones(1))
    if np.all(g == g[0]):
        return equal_weights(n)
    if n == 2:
        return min_norm_two(g[0], g[1])
    alpha, _ = frank_wolfe_min_norm(g @ g.T, max_iter=max_iter, tol=tol)
    return WeightVector(alpha)


def min_norm_point(gradients, weights=None):
    g = check_gradients(gradients)
    w = mgda_weights(g).weights if weights is None else np.asarray(weights, dtype=float)
    return w @ g


class MGDAWeighting(LossWeighting):
    """Multiple-gradient-descent weights, recomputed every step.

    Parameters
    ----------
    max_iter : int, default=250
        Frank-Wolfe iteration cap (three or more losses).
    tol : float, default=1e-10
        Duality-gap stopping threshold, relative to the largest squared
        gradient norm.
    """

    requires_gradients = True

    def __init__(self, max_iter=MAX_ITER, tol=TOL):
        self.max_iter = max_iter
        self.tol = tol

    def _check_params(self):
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")

    def _init_state(self, n_losses):
        pass

    def _update(self, losses, gradients):
        return mgda_weights(gradients, int(self.max_iter), float(self.tol))
