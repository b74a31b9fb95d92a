"""NAdam parameter updates with a mutable learning-rate handle.

The Nesterov-corrected step uses the schedule-free form

    m <- b1*m + (1-b1)*g        v <- b2*v + (1-b2)*g^2
    step = lr * (b1 * m/(1-b1^t) + (1-b1) * g/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)

applied in place, one shared step counter across all parameters.
"""

from __future__ import annotations

import numpy as np

from .tensor import ParameterError, ShapeError


class Nadam:
    def __init__(self, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999,
                 epsilon: float = 1e-8):
        if lr <= 0:
            raise ParameterError(f"learning rate must be > 0, got {lr}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def set_learning_rate(self, lr: float) -> None:
        """Change the step size; moments and step counter are untouched."""
        if lr <= 0:
            raise ParameterError(f"learning rate must be > 0, got {lr}")
        self.lr = lr

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Apply one NAdam update to every parameter, in place.

        Rejects the whole step (state and parameters untouched) if any
        gradient is non-finite or shape-mismatched.
        """
        for name, p in params.items():
            g = grads.get(name)
            if g is None:
                raise ParameterError(f"missing gradient for parameter '{name}'")
            if g.shape != p.shape:
                raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape} for '{name}'")
            if not np.all(np.isfinite(g)):
                raise ParameterError(f"non-finite gradient for parameter '{name}'; update rejected")

        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in params.items():
            g = grads[name]
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            m_hat = m / bc1
            nesterov = self.beta1 * m_hat + ((1.0 - self.beta1) / bc1) * g
            p -= self.lr * nesterov / (np.sqrt(v / bc2) + self.epsilon)
