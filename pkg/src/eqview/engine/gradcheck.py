"""Finite-difference verification of the backward passes.

Central differences (f(x+eps) - f(x-eps)) / (2 eps), coordinate by
coordinate, against the backprop gradient of the softmax cross-entropy
loss.  Intended for small models; cost is two forwards per coordinate.
"""

from __future__ import annotations

import numpy as np

from .loss import softmax_cross_entropy

# Relative-error denominator floor.  Central differencing of an O(1) loss
# carries ~ulp/(2*eps) absolute noise (~1e-11 at eps=1e-5 in float64), so
# coordinates whose true gradient is below this scale are compared against
# the floor instead of their own magnitude.
_DENOM_FLOOR = 1e-4


def _loss(model, x: np.ndarray, targets: np.ndarray) -> float:
    logits = model.forward(x, mode="train")
    loss, _ = softmax_cross_entropy(logits, targets)
    return loss


def finite_diff_check(
    model,
    x: np.ndarray,
    targets: np.ndarray,
    eps: float = 1e-5,
    check_input: bool = True,
) -> float:
    """Max relative error between backprop and central-difference gradients.

    Checks every parameter coordinate and (optionally) every input
    coordinate.  The model must implement forward/backward/parameters/
    zero_grad.
    """
    model.zero_grad()
    logits = model.forward(x, mode="train")
    _, dlogits = softmax_cross_entropy(logits, targets)
    grad_input = model.backward(dlogits)

    max_rel = 0.0

    def compare(analytic: float, numeric: float) -> None:
        nonlocal max_rel
        denom = max(abs(analytic), abs(numeric), _DENOM_FLOOR)
        max_rel = max(max_rel, abs(analytic - numeric) / denom)

    for _, p in model.parameters():
        flat = p.data.reshape(-1)
        grads = p.grad.reshape(-1) if p.grad is not None else np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            loss_plus = _loss(model, x, targets)
            flat[i] = orig - eps
            loss_minus = _loss(model, x, targets)
            flat[i] = orig
            compare(float(grads[i]), (loss_plus - loss_minus) / (2 * eps))

    if check_input:
        xf = x.reshape(-1)
        gf = grad_input.reshape(-1)
        for i in range(xf.size):
            orig = xf[i]
            xf[i] = orig + eps
            loss_plus = _loss(model, x, targets)
            xf[i] = orig - eps
            loss_minus = _loss(model, x, targets)
            xf[i] = orig
            compare(float(gf[i]), (loss_plus - loss_minus) / (2 * eps))

    return max_rel
