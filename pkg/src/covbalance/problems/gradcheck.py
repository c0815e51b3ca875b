"""Central finite-difference checks for per-loss gradients."""

from __future__ import annotations

import numpy as np


def central_difference(fun, x, h=1e-6):
    """Jacobian of a vector-valued ``fun`` at ``x`` by central differences.

    ``h`` is relative: each coordinate is perturbed by ``h * max(1, |x_j|)``.
    Returns an array of shape ``(len(fun(x)), len(x))``.
    """
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(fun(x))
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        step = h * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += step
        xm[j] -= step
        jac[:, j] = (np.atleast_1d(fun(xp)) - np.atleast_1d(fun(xm))) / (2.0 * step)
    return jac


def gradient_error(problem, params, sample=None, h=1e-6, floor=1e-8):
    """Largest relative error between analytic and finite-difference gradients.

    The error of each loss's gradient row is ``||g - g_fd|| / max(||g_fd||, floor)``.
    ``sample`` is a fixed noise draw, held constant across the perturbations.
    """
    _, grads = problem.evaluate_sample(params, sample, 0)
    fd = central_difference(lambda p: problem.evaluate_sample(p, sample, 0)[0], params, h)
    num = np.linalg.norm(grads - fd, axis=1)
    den = np.maximum(np.linalg.norm(fd, axis=1), floor)
    return float(np.max(num / den))


def directional_error(problem, params, direction, sample=None, h=1e-6, floor=1e-8):
    """Error of ``g . d`` against a central difference along ``d``, per loss.

    Two evaluations check every loss at once, which keeps large problems
    cheap. ``direction`` is normalized to unit length first, and each
    loss's error is taken relative to its gradient norm (the largest
    directional derivative), ``|g.d - fd| / max(||g||, floor)``.
    """
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    step = h * max(1.0, float(np.max(np.abs(params))))
    _, grads = problem.evaluate_sample(params, sample, 0)
    plus = problem.evaluate_sample(params + step * d, sample, 0)[0]
    minus = problem.evaluate_sample(params - step * d, sample, 0)[0]
    fd = (plus - minus) / (2.0 * step)
    analytic = grads @ d
    scale = np.maximum(np.linalg.norm(grads, axis=1), floor)
    return float(np.max(np.abs(analytic - fd) / scale))
