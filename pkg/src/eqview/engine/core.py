"""Engine core: the build-wide float precision switch and parameter store.

The engine computes everything in one floating-point precision, selected
globally (float32 by default, float64 for tight gradient verification).
Verification tolerances are stated per precision by the callers.
"""

from __future__ import annotations

import numpy as np


class ShapeMismatch(ValueError):
    """Raised when tensor shapes are incompatible with an operation."""


_DTYPES = {"float32": np.float32, "float64": np.float64}
_default_dtype = np.float32


def set_default_dtype(dtype) -> None:
    """Select the engine-wide precision ("float32" or "float64").

    Affects parameters created afterwards; existing models keep their dtype.
    """
    global _default_dtype
    if isinstance(dtype, str):
        if dtype not in _DTYPES:
            raise ValueError(f"unsupported dtype {dtype!r}")
        _default_dtype = _DTYPES[dtype]
        return
    dt = np.dtype(dtype)
    if dt.name not in _DTYPES:
        raise ValueError(f"unsupported dtype {dt.name!r}")
    _default_dtype = _DTYPES[dt.name]


def default_dtype() -> np.dtype:
    return np.dtype(_default_dtype)


class Parameter(object):
    """A learnable tensor with an explicit gradient record."""

    __slots__ = ("data", "grad")

    def __init__(self, data: np.ndarray):
        self.data = np.ascontiguousarray(data, dtype=default_dtype())
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise ShapeMismatch(
                f"gradient shape {grad.shape} != parameter shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = grad.astype(self.data.dtype, copy=True)
        else:
            self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None


class Sequential(object):
    """A plain layer chain implementing the model protocol.

    The protocol shared with the architecture builders: ``forward(x, mode)``,
    ``backward(grad)`` (returns the input gradient), ``parameters()`` as
    (name, Parameter) pairs, ``state_tensors()`` for checkpointing, and
    ``zero_grad()``.
    """

    def __init__(self, layers: list, names: list[str] | None = None):
        self.layers = list(layers)
        if names is None:
            names = [f"layer{i}.{type(l).__name__.lower()}" for i, l in enumerate(self.layers)]
        if len(names) != len(self.layers):
            raise ValueError("one name per layer required")
        self.names = names

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, mode)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self) -> list[tuple[str, Parameter]]:
        out = []
        for name, layer in zip(self.names, self.layers):
            for pname, p in layer.params():
                out.append((f"{name}.{pname}", p))
        return out

    def state_tensors(self) -> list[tuple[str, np.ndarray]]:
        out = [(name, p.data) for name, p in self.parameters()]
        for name, layer in zip(self.names, self.layers):
            for sname, arr in getattr(layer, "state", lambda: [])():
                out.append((f"{name}.{sname}", arr))
        return out

    def zero_grad(self) -> None:
        for _, p in self.parameters():
            p.zero_grad()
