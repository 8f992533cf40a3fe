"""From-scratch numerical engine: tensors, layers, loss, SGDM, verification.

Single-threaded and deterministic: identical inputs and state give
bit-identical outputs within one environment.
"""

from .core import Parameter, Sequential, ShapeMismatch, default_dtype, set_default_dtype
from .layers import (
    Add,
    BatchNorm2d,
    Conv2d,
    Flatten,
    GlobalAvgPool2d,
    Linear,
    MaxPool2d,
    ReLU,
)
from .loss import BadTargetIndex, softmax, softmax_cross_entropy
from .optim import SGDM, sgdm_step
from .gradcheck import finite_diff_check
from .checkpoint import (
    BadCheckpoint,
    dump_checkpoint,
    load_checkpoint,
    load_model,
    save_model,
)

__all__ = [
    "Add",
    "BadCheckpoint",
    "BadTargetIndex",
    "BatchNorm2d",
    "Conv2d",
    "Flatten",
    "GlobalAvgPool2d",
    "Linear",
    "MaxPool2d",
    "Parameter",
    "ReLU",
    "SGDM",
    "Sequential",
    "ShapeMismatch",
    "default_dtype",
    "dump_checkpoint",
    "finite_diff_check",
    "load_checkpoint",
    "load_model",
    "save_model",
    "set_default_dtype",
    "sgdm_step",
    "softmax",
    "softmax_cross_entropy",
]
