"""Layer forward/backward implementations.

Activations are (batch, channels, height, width) arrays.  Convolution is
cross-correlation (no kernel flip) with zero padding.  Each layer caches
what its backward pass needs on the instance; backward returns the input
gradient and accumulates parameter gradients into Parameter.grad.
"""

from __future__ import annotations

import numpy as np

from .core import Parameter, ShapeMismatch, default_dtype
from ..rng import normal_array

_MODES = ("train", "eval")


def _check_mode(mode: str) -> None:
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")


def _windows(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Sliding-window view (b, c, oh, ow, kh, kw); x must be contiguous."""
    b, c, h, w = x.shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    sb, sc, sh, sw = x.strides
    return np.lib.stride_tricks.as_strided(
        x,
        shape=(b, c, oh, ow, kh, kw),
        strides=(sb, sc, sh * stride, sw * stride, sh, sw),
        writeable=False,
    )


class Conv2d(object):
    """2-d cross-correlation with zero padding.

    Weight shape (out_channels, in_channels, kh, kw); He-normal init,
    zero-init bias when biased.  Internally the input is transposed once
    to channels-last, so each kernel tap becomes one large GEMM over
    contiguous slices (much faster than gathering window views).
    """

    def __init__(self, in_channels, out_channels, kernel_size, stride=1,
                 padding=0, bias=True, init_seed=0):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        kh, kw = (kernel_size, kernel_size) if isinstance(kernel_size, int) else kernel_size
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = (kh, kw)
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kh * kw
        scale = np.sqrt(2.0 / fan_in)
        self.weight = Parameter(
            normal_array(init_seed, (out_channels, in_channels, kh, kw)) * scale
        )
        self.bias = Parameter(np.zeros(out_channels)) if bias else None
        self._cache = None

    def params(self):
        out = [("weight", self.weight)]
        if self.bias is not None:
            out.append(("bias", self.bias))
        return out

    def _tap_weights(self) -> list[np.ndarray]:
        """Per-tap (in, out) weight matrices for the shift-and-GEMM scheme."""
        kh, kw = self.kernel_size
        return [
            np.ascontiguousarray(self.weight.data[:, :, ki, kj].T)
            for ki in range(kh)
            for kj in range(kw)
        ]

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        _check_mode(mode)
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeMismatch(
                f"expected (b, {self.in_channels}, h, w), got {x.shape}"
            )
        b, c, h, w = x.shape
        kh, kw = self.kernel_size
        p, s = self.padding, self.stride
        hp, wp = h + 2 * p, w + 2 * p
        if hp < kh or wp < kw:
            raise ShapeMismatch(f"input {x.shape} smaller than kernel {self.kernel_size}")
        oh = (hp - kh) // s + 1
        ow = (wp - kw) // s + 1
        # Channels-last padded copy, then one GEMM per kernel tap over a
        # shifted slice (fast contiguous-chunk copies, no window gather).
        xt = np.zeros((b, hp, wp, c), dtype=x.dtype)
        xt[:, p:p + h, p:p + w, :] = np.moveaxis(x, 1, 3)
        taps = self._tap_weights()
        acc = np.zeros((b, oh, ow, self.out_channels), dtype=x.dtype)
        acc2 = acc.reshape(-1, self.out_channels)
        for ki in range(kh):
            for kj in range(kw):
                tap = xt[:, ki:ki + s * oh:s, kj:kj + s * ow:s, :].reshape(-1, c)
                acc2 += tap @ taps[ki * kw + kj]
        if self.bias is not None:
            acc2 += self.bias.data
        self._cache = (x.shape, xt, (oh, ow))
        return np.ascontiguousarray(np.moveaxis(acc, 3, 1))

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x_shape, xt, (oh, ow) = self._cache
        b, c, h, w = x_shape
        kh, kw = self.kernel_size
        p, s = self.padding, self.stride
        if self.bias is not None:
            self.bias.accumulate_grad(grad_out.sum(axis=(0, 2, 3)))
        gyt2 = np.ascontiguousarray(np.moveaxis(grad_out, 1, 3)).reshape(
            -1, self.out_channels
        )
        taps = self._tap_weights()
        grad_w = np.empty_like(self.weight.data)
        dxt = np.zeros_like(xt)
        for ki in range(kh):
            for kj in range(kw):
                tap_view = xt[:, ki:ki + s * oh:s, kj:kj + s * ow:s, :]
                grad_w[:, :, ki, kj] = gyt2.T @ tap_view.reshape(-1, c)
                dxt[:, ki:ki + s * oh:s, kj:kj + s * ow:s, :] += (
                    gyt2 @ taps[ki * kw + kj].T
                ).reshape(b, oh, ow, c)
        self.weight.accumulate_grad(grad_w)
        inner = dxt[:, p:p + h, p:p + w, :] if p else dxt
        return np.ascontiguousarray(np.moveaxis(inner, 3, 1))


class ReLU(object):
    def __init__(self):
        self._out = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        _check_mode(mode)
        out = np.maximum(x, x.dtype.type(0))
        self._out = out
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out * (self._out > 0)


class MaxPool2d(object):
    """Window max pooling; padding (when used) is ignored by the max."""

    def __init__(self, kernel_size: int, stride: int, padding: int = 0):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        self._cache = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        _check_mode(mode)
        k, s, p = self.kernel_size, self.stride, self.padding
        if p:
            xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)),
                        constant_values=-np.inf)
        else:
            xp = np.ascontiguousarray(x)
        if xp.shape[2] < k or xp.shape[3] < k:
            raise ShapeMismatch(f"input {x.shape} smaller than pool window {k}")
        win = _windows(xp, k, k, s)
        b, c, oh, ow = win.shape[:4]
        flat = win.reshape(b, c, oh, ow, k * k)
        idx = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
        self._cache = (x.shape, xp.shape, idx)
        return np.ascontiguousarray(out)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x_shape, xp_shape, idx = self._cache
        k, s, p = self.kernel_size, self.stride, self.padding
        b, c, oh, ow = idx.shape
        dxp = np.zeros((b, c) + xp_shape[2:], dtype=grad_out.dtype)
        bi, ci, yi, xi = np.ogrid[:b, :c, :oh, :ow]
        rows = yi * s + idx // k
        cols = xi * s + idx % k
        np.add.at(dxp, (bi, ci, rows, cols), grad_out)
        h, w = x_shape[2], x_shape[3]
        return dxp[:, :, p:p + h, p:p + w] if p else dxp


class GlobalAvgPool2d(object):
    """Spatial mean per channel: (b, c, h, w) -> (b, c)."""

    def __init__(self):
        self._spatial = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        _check_mode(mode)
        self._spatial = x.shape[2:]
        return x.mean(axis=(2, 3))

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        h, w = self._spatial
        scale = grad_out.dtype.type(1.0 / (h * w))
        return np.broadcast_to(
            (grad_out * scale)[:, :, None, None],
            grad_out.shape + (h, w),
        ).copy()


class Flatten(object):
    def __init__(self):
        self._shape = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        _check_mode(mode)
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out.reshape(self._shape)


class Linear(object):
    """Affine map on (batch, features): y = x W + b, W shape (in, out)."""

    def __init__(self, in_features: int, out_features: int, bias: bool = True,
                 init_seed: int = 0):
        self.in_features = in_features
        self.out_features = out_features
        scale = np.sqrt(2.0 / in_features)
        self.weight = Parameter(
            normal_array(init_seed, (in_features, out_features)) * scale
        )
        self.bias = Parameter(np.zeros(out_features)) if bias else None
        self._x = None

    def params(self):
        out = [("weight", self.weight)]
        if self.bias is not None:
            out.append(("bias", self.bias))
        return out

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        _check_mode(mode)
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatch(f"expected (b, {self.in_features}), got {x.shape}")
        self._x = x
        out = x @ self.weight.data
        if self.bias is not None:
            out += self.bias.data
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        self.weight.accumulate_grad(self._x.T @ grad_out)
        if self.bias is not None:
            self.bias.accumulate_grad(grad_out.sum(axis=0))
        return grad_out @ self.weight.data.T


class BatchNorm2d(object):
    """Per-channel batch normalization with learnable scale and shift.

    TRAIN uses batch statistics and updates running statistics with
    momentum 0.1 (new = 0.9 * old + 0.1 * batch, unbiased variance for the
    running estimate); EVAL normalizes with the running statistics.
    """

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        dt = default_dtype()
        self.running_mean = np.zeros(channels, dtype=dt)
        self.running_var = np.ones(channels, dtype=dt)
        self._cache = None

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def state(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        _check_mode(mode)
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ShapeMismatch(f"expected (b, {self.channels}, h, w), got {x.shape}")
        if mode == "train":
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            n = x.shape[0] * x.shape[2] * x.shape[3]
            unbiased = var * (n / (n - 1)) if n > 1 else var
            m = self.momentum
            self.running_mean *= (1 - m)
            self.running_mean += m * mean.astype(self.running_mean.dtype)
            self.running_var *= (1 - m)
            self.running_var += m * unbiased.astype(self.running_var.dtype)
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = x - mean[None, :, None, None]
        xhat *= inv_std[None, :, None, None]
        self._cache = (xhat, inv_std, mode)
        out = xhat * self.gamma.data[None, :, None, None]
        out += self.beta.data[None, :, None, None]
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        xhat, inv_std, mode = self._cache
        self.gamma.accumulate_grad((grad_out * xhat).sum(axis=(0, 2, 3)))
        self.beta.accumulate_grad(grad_out.sum(axis=(0, 2, 3)))
        dxhat = grad_out * self.gamma.data[None, :, None, None]
        if mode == "eval":
            return dxhat * inv_std[None, :, None, None]
        n = grad_out.shape[0] * grad_out.shape[2] * grad_out.shape[3]
        sum_dxhat = dxhat.sum(axis=(0, 2, 3))
        sum_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2, 3))
        dx = dxhat
        dx -= sum_dxhat[None, :, None, None] / n
        dx -= xhat * (sum_dxhat_xhat[None, :, None, None] / n)
        dx *= inv_std[None, :, None, None]
        return dx


class Add(object):
    """Residual join: elementwise sum of two equal-shape inputs."""

    def params(self):
        return []

    def forward(self, a: np.ndarray, b: np.ndarray, mode: str = "train") -> np.ndarray:
        _check_mode(mode)
        if a.shape != b.shape:
            raise ShapeMismatch(f"cannot add {a.shape} and {b.shape}")
        return a + b

    def backward(self, grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return grad_out, grad_out
