"""First-order optimizers over flat numpy parameter vectors."""

from __future__ import annotations

import numpy as np

from covbalance.validation import check_vector


class NonFiniteGradientError(FloatingPointError):
    """A gradient with NaN/inf entries reached the optimizer."""


class Optimizer:
    lr: float

    def step(self, params, gradient):
        """Return updated parameters; internal state advances by one step."""
        params = check_vector(params)
        gradient = check_vector(gradient, params.size, name="gradient")
        if not np.all(np.isfinite(gradient)):
            raise NonFiniteGradientError("non-finite gradient, aborting run")
        return self._step(params, gradient)

    def _step(self, params, gradient):
        raise NotImplementedError


class SGD(Optimizer):
    """Gradient descent with optional heavy-ball momentum."""

    def __init__(self, lr=1e-4, momentum=0.0):
        if not lr > 0:
            raise ValueError(f"lr must be > 0, got {lr!r}")
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {momentum!r}")
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.velocity = None

    def _step(self, params, gradient):
        if self.momentum == 0.0:
            return params - self.lr * gradient
        if self.velocity is None:
            self.velocity = np.zeros_like(params)
        self.velocity = self.momentum * self.velocity + gradient
        return params - self.lr * self.velocity


class Adam(Optimizer):
    """Adam with bias-corrected moment estimates."""

    def __init__(self, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        if not lr > 0:
            raise ValueError(f"lr must be > 0, got {lr!r}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValueError("betas must be in [0, 1)")
        if not eps > 0:
            raise ValueError("eps must be > 0")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = None
        self.v = None
        self.t = 0

    def _step(self, params, gradient):
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        elif self.m.size != params.size:
            raise ValueError("parameter dimension changed between steps")
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * gradient
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * gradient * gradient
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


OPTIMIZERS = {"sgd": SGD, "adam": Adam}


def make_optimizer(name, **kwargs) -> Optimizer:
    try:
        cls = OPTIMIZERS[name]
    except KeyError:
        raise ValueError(f"unknown optimizer {name!r}; valid: {', '.join(OPTIMIZERS)}") from None
    return cls(**kwargs)
