"""Softmax cross-entropy over the class logits."""

from __future__ import annotations

import numpy as np


class BadTargetIndex(ValueError):
    """A target class index is outside [0, num_classes)."""


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by max subtraction."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(
    logits: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient w.r.t. the logits.

    grad = (softmax(logits) - onehot(targets)) / batch.
    """
    if logits.ndim != 2:
        raise ValueError(f"expected (batch, classes) logits, got {logits.shape}")
    targets = np.asarray(targets)
    batch, num_classes = logits.shape
    if targets.shape != (batch,):
        raise BadTargetIndex(f"expected {batch} targets, got shape {targets.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= num_classes):
        raise BadTargetIndex(f"targets outside [0, {num_classes})")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_probs = z - log_norm
    rows = np.arange(batch)
    loss = float(-log_probs[rows, targets].mean())
    grad = np.exp(log_probs)
    grad[rows, targets] -= 1.0
    grad /= batch
    return loss, grad.astype(logits.dtype, copy=False)
