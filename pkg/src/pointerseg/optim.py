"""Stochastic gradient descent with classical momentum."""

import numpy as np

from .tensor import ParameterCollection


class SGD:
    """v = momentum * v + grad; w = w - lr * v.

    step() requires every parameter to carry a gradient and clears all
    gradients afterwards, so a skipped backward surfaces immediately
    instead of silently reusing stale values.
    """

    def __init__(self, params: ParameterCollection, lr: float, momentum: float = 0.0):
        if lr < 0:
            raise ValueError(f"lr must be non-negative, got {lr}")
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self._velocity = {p.name: np.zeros_like(p.data) for p in params}

    def step(self) -> None:
        for p in self.params:
            if p.grad is None:
                raise RuntimeError(f"parameter {p.name!r} has no gradient")
        for p in self.params:
            v = self._velocity[p.name]
            v = self.momentum * v + p.grad
            self._velocity[p.name] = v
            p.data = p.data - self.lr * v
            p.grad = None

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
