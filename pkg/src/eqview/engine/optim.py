"""Stochastic gradient descent with momentum.

Update rule (the common deep-learning formulation):

    v <- momentum * v + g
    p <- p - lr * v

The default lr=0.01, momentum=0.9 are package defaults, not reported
training settings.
"""

from __future__ import annotations

import numpy as np

from .core import Parameter, ShapeMismatch


def sgdm_step(
    param: np.ndarray,
    grad: np.ndarray,
    velocity: np.ndarray,
    lr: float,
    momentum: float,
) -> None:
    """One in-place SGDM update of a single tensor."""
    if grad.shape != param.shape or velocity.shape != param.shape:
        raise ShapeMismatch(
            f"param {param.shape}, grad {grad.shape}, velocity {velocity.shape}"
        )
    velocity *= momentum
    velocity += grad
    param -= lr * velocity


class SGDM(object):
    """Momentum optimizer over a parameter list; one velocity per tensor."""

    def __init__(self, params: list[tuple[str, Parameter]], lr: float = 0.01,
                 momentum: float = 0.9):
        if lr <= 0:
            raise ValueError("lr must be positive")
        if not 0 <= momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        self.lr = lr
        self.momentum = momentum
        self._params = [p for _, p in params]
        self._velocities = [np.zeros_like(p.data) for p in self._params]

    def step(self) -> None:
        for p, v in zip(self._params, self._velocities):
            if p.grad is None:
                continue
            sgdm_step(p.data, p.grad, v, self.lr, self.momentum)

    def zero_grad(self) -> None:
        for p in self._params:
            p.zero_grad()
