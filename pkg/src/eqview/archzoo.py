"""Architecture zoo: static descriptors of the six classification networks
with exact parameter counting, and a trainable residual-network builder.

Descriptors are flat layer graphs carrying enough hyperparameters to count
learnable tensors exactly (conv: kh*kw*(cin/groups)*cout (+cout bias);
linear: in*out+out; batch norm: 2*channels; running statistics excluded).
Only the residual family is trainable; the other three architectures are
countable descriptors.  "MobileNet V3" is the Large variant, whose
standard parameter count matches the reference table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .engine import (
    Add,
    BatchNorm2d,
    Conv2d,
    GlobalAvgPool2d,
    Linear,
    MaxPool2d,
    ReLU,
)
from .rng import derive_seed


class BadConfig(ValueError):
    """Invalid builder configuration."""


class UnknownArchitecture(ValueError):
    """Architecture name not in the zoo."""


class MissingBaseline(ValueError):
    """Relative ratios need the Inception V3 count as denominator."""


class ArchName(str, Enum):
    DENSENET121 = "DENSENET121"
    INCEPTIONV3 = "INCEPTIONV3"
    MOBILENETV3 = "MOBILENETV3"
    RESNET18 = "RESNET18"
    RESNET34 = "RESNET34"
    RESNET50 = "RESNET50"


DISPLAY_NAMES = {
    ArchName.DENSENET121: "DenseNet-121",
    ArchName.INCEPTIONV3: "Inception V3",
    ArchName.MOBILENETV3: "MobileNet V3",
    ArchName.RESNET18: "ResNet-18",
    ArchName.RESNET34: "ResNet-34",
    ArchName.RESNET50: "ResNet-50",
}

# Parameter-bearing kinds are the engine layer kinds; the remaining kinds
# are zero-parameter structure annotations used by descriptor-only graphs.
PARAM_KINDS = ("CONV2D", "LINEAR", "BATCHNORM2D")
STRUCT_KINDS = (
    "RELU",
    "MAXPOOL2D",
    "AVGPOOL2D",
    "GLOBALAVGPOOL",
    "ADD",
    "CONCAT",
    "FLATTEN",
    "HARDSWISH",
    "HARDSIGMOID",
    "SCALE",
    "DROPOUT",
)


@dataclass(frozen=True)
class LayerSpec:
    """One node of a layer graph; hyperparameters depend on the kind."""

    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel: tuple[int, int] = (0, 0)
    stride: int = 1
    padding: tuple[int, int] = (0, 0)
    groups: int = 1
    bias: bool = False

    def __post_init__(self):
        if self.kind not in PARAM_KINDS and self.kind not in STRUCT_KINDS:
            raise BadConfig(f"unknown layer kind {self.kind!r}")
        if self.stride < 1:
            raise BadConfig("stride must be >= 1")
        if self.kind == "CONV2D":
            if self.groups < 1 or self.in_channels % self.groups:
                raise BadConfig("groups must divide in_channels")
            if min(self.kernel) < 1:
                raise BadConfig("kernel dims must be >= 1")

    @property
    def parameter_count(self) -> int:
        if self.kind == "CONV2D":
            n = self.kernel[0] * self.kernel[1] * (self.in_channels // self.groups) * self.out_channels
            return n + (self.out_channels if self.bias else 0)
        if self.kind == "LINEAR":
            return self.in_channels * self.out_channels + (self.out_channels if self.bias else 0)
        if self.kind == "BATCHNORM2D":
            return 2 * self.out_channels
        return 0


@dataclass
class ArchDescriptor:
    name: ArchName
    num_classes: int
    input_channels: int
    nodes: list[LayerSpec] = field(default_factory=list)


def _conv(cin, cout, k, stride=1, padding=0, groups=1, bias=False) -> LayerSpec:
    kk = (k, k) if isinstance(k, int) else k
    pp = (padding, padding) if isinstance(padding, int) else padding
    return LayerSpec("CONV2D", cin, cout, kk, stride, pp, groups, bias)


def _bn(c) -> LayerSpec:
    return LayerSpec("BATCHNORM2D", c, c)


def _linear(fin, fout) -> LayerSpec:
    return LayerSpec("LINEAR", fin, fout, bias=True)


def _node(kind, cin=0, cout=0) -> LayerSpec:
    return LayerSpec(kind, cin, cout or cin)


def count_parameters(obj) -> int:
    """Learnable parameter total of a descriptor or a trainable model."""
    if isinstance(obj, ArchDescriptor):
        return sum(n.parameter_count for n in obj.nodes)
    if hasattr(obj, "parameters"):
        return sum(p.data.size for _, p in obj.parameters())
    if isinstance(obj, (list, tuple)):
        return sum(n.parameter_count for n in obj)
    raise TypeError(f"cannot count parameters of {type(obj)!r}")


def relative_parameters(counts: dict[ArchName, int]) -> dict[ArchName, float]:
    """Ratios against the Inception V3 count, rounded to 2 decimals."""
    if ArchName.INCEPTIONV3 not in counts:
        raise MissingBaseline("Inception V3 count required as denominator")
    base = counts[ArchName.INCEPTIONV3]
    return {name: round(count / base, 2) for name, count in counts.items()}


# --- static descriptors ---------------------------------------------------

def _resnet_stage_plan(blocks: list[int]) -> list[tuple[int, int, int]]:
    """(n_blocks, width, stride of first block) per stage."""
    widths = [64, 128, 256, 512]
    return [(n, widths[i], 1 if i == 0 else 2) for i, n in enumerate(blocks)]


def _describe_resnet_basic(blocks, num_classes, input_channels) -> list[LayerSpec]:
    nodes = [
        _conv(input_channels, 64, 7, 2, 3), _bn(64), _node("RELU", 64),
        _node("MAXPOOL2D", 64),
    ]
    cin = 64
    for n, width, first_stride in _resnet_stage_plan(blocks):
        for b in range(n):
            stride = first_stride if b == 0 else 1
            nodes += [
                _conv(cin, width, 3, stride, 1), _bn(width), _node("RELU", width),
                _conv(width, width, 3, 1, 1), _bn(width),
            ]
            if stride != 1 or cin != width:
                nodes += [_conv(cin, width, 1, stride), _bn(width)]
            nodes += [_node("ADD", width), _node("RELU", width)]
            cin = width
    nodes += [_node("GLOBALAVGPOOL", cin), _linear(cin, num_classes)]
    return nodes


def _describe_resnet_bottleneck(blocks, num_classes, input_channels) -> list[LayerSpec]:
    nodes = [
        _conv(input_channels, 64, 7, 2, 3), _bn(64), _node("RELU", 64),
        _node("MAXPOOL2D", 64),
    ]
    cin = 64
    for n, width, first_stride in _resnet_stage_plan(blocks):
        cout = width * 4
        for b in range(n):
            stride = first_stride if b == 0 else 1
            nodes += [
                _conv(cin, width, 1), _bn(width), _node("RELU", width),
                _conv(width, width, 3, stride, 1), _bn(width), _node("RELU", width),
                _conv(width, cout, 1), _bn(cout),
            ]
            if stride != 1 or cin != cout:
                nodes += [_conv(cin, cout, 1, stride), _bn(cout)]
            nodes += [_node("ADD", cout), _node("RELU", cout)]
            cin = cout
    nodes += [_node("GLOBALAVGPOOL", cin), _linear(cin, num_classes)]
    return nodes


def _describe_densenet121(num_classes, input_channels) -> list[LayerSpec]:
    growth, bottleneck_width, block_sizes = 32, 4, [6, 12, 24, 16]
    nodes = [
        _conv(input_channels, 64, 7, 2, 3), _bn(64), _node("RELU", 64),
        _node("MAXPOOL2D", 64),
    ]
    c = 64
    for i, n in enumerate(block_sizes):
        for _ in range(n):
            mid = bottleneck_width * growth
            nodes += [
                _bn(c), _node("RELU", c), _conv(c, mid, 1),
                _bn(mid), _node("RELU", mid), _conv(mid, growth, 3, 1, 1),
                _node("CONCAT", c + growth),
            ]
            c += growth
        if i < len(block_sizes) - 1:
            nodes += [_bn(c), _node("RELU", c), _conv(c, c // 2, 1), _node("AVGPOOL2D", c // 2)]
            c //= 2
    nodes += [_bn(c), _node("RELU", c), _node("GLOBALAVGPOOL", c), _linear(c, num_classes)]
    return nodes


def _basic_inception_conv(cin, cout, k, stride=1, padding=0) -> list[LayerSpec]:
    return [_conv(cin, cout, k, stride, padding), _bn(cout), _node("RELU", cout)]


def _describe_inception_v3(num_classes, input_channels) -> list[LayerSpec]:
    b = _basic_inception_conv
    nodes: list[LayerSpec] = []
    nodes += b(input_channels, 32, 3, 2)
    nodes += b(32, 32, 3)
    nodes += b(32, 64, 3, padding=1)
    nodes += [_node("MAXPOOL2D", 64)]
    nodes += b(64, 80, 1)
    nodes += b(80, 192, 3)
    nodes += [_node("MAXPOOL2D", 192)]

    def inception_a(cin, pool_features):
        branch = []
        branch += b(cin, 64, 1)
        branch += b(cin, 48, 1) + b(48, 64, 5, padding=2)
        branch += b(cin, 64, 1) + b(64, 96, 3, padding=1) + b(96, 96, 3, padding=1)
        branch += [_node("AVGPOOL2D", cin)] + b(cin, pool_features, 1)
        return branch + [_node("CONCAT", 224 + pool_features)]

    def inception_b(cin):
        branch = []
        branch += b(cin, 384, 3, 2)
        branch += b(cin, 64, 1) + b(64, 96, 3, padding=1) + b(96, 96, 3, 2)
        branch += [_node("MAXPOOL2D", cin)]
        return branch + [_node("CONCAT", 480 + cin)]

    def inception_c(cin, c7):
        branch = []
        branch += b(cin, 192, 1)
        branch += b(cin, c7, 1) + b(c7, c7, (1, 7), padding=(0, 3)) + b(c7, 192, (7, 1), padding=(3, 0))
        branch += (
            b(cin, c7, 1)
            + b(c7, c7, (7, 1), padding=(3, 0))
            + b(c7, c7, (1, 7), padding=(0, 3))
            + b(c7, c7, (7, 1), padding=(3, 0))
            + b(c7, 192, (1, 7), padding=(0, 3))
        )
        branch += [_node("AVGPOOL2D", cin)] + b(cin, 192, 1)
        return branch + [_node("CONCAT", 768)]

    def inception_d(cin):
        branch = []
        branch += b(cin, 192, 1) + b(192, 320, 3, 2)
        branch += (
            b(cin, 192, 1)
            + b(192, 192, (1, 7), padding=(0, 3))
            + b(192, 192, (7, 1), padding=(3, 0))
            + b(192, 192, 3, 2)
        )
        branch += [_node("MAXPOOL2D", cin)]
        return branch + [_node("CONCAT", 512 + cin)]

    def inception_e(cin):
        branch = []
        branch += b(cin, 320, 1)
        branch += b(cin, 384, 1) + b(384, 384, (1, 3), padding=(0, 1)) + b(384, 384, (3, 1), padding=(1, 0))
        branch += (
            b(cin, 448, 1)
            + b(448, 384, 3, padding=1)
            + b(384, 384, (1, 3), padding=(0, 1))
            + b(384, 384, (3, 1), padding=(1, 0))
        )
        branch += [_node("AVGPOOL2D", cin)] + b(cin, 192, 1)
        return branch + [_node("CONCAT", 2048)]

    nodes += inception_a(192, 32)
    nodes += inception_a(256, 64)
    nodes += inception_a(288, 64)
    nodes += inception_b(288)
    nodes += inception_c(768, 128)
    nodes += inception_c(768, 160)
    nodes += inception_c(768, 160)
    nodes += inception_c(768, 192)
    # Auxiliary classifier branch (contributes to the standard count).
    nodes += [_node("AVGPOOL2D", 768)]
    nodes += b(768, 128, 1)
    nodes += b(128, 768, 5)
    nodes += [_node("GLOBALAVGPOOL", 768), _linear(768, num_classes)]
    nodes += inception_d(768)
    nodes += inception_e(1280)
    nodes += inception_e(2048)
    nodes += [_node("GLOBALAVGPOOL", 2048), _linear(2048, num_classes)]
    return nodes


def _make_divisible(value: float, divisor: int = 8) -> int:
    new_value = max(divisor, int(value + divisor / 2) // divisor * divisor)
    if new_value < 0.9 * value:
        new_value += divisor
    return new_value


def _describe_mobilenet_v3_large(num_classes, input_channels) -> list[LayerSpec]:
    # (kernel, expanded, out, squeeze-excite, stride); activations are
    # structure-only and omitted from the node list except where they sit
    # between parameterized layers of the main trunk.
    rows = [
        (3, 16, 16, False, 1),
        (3, 64, 24, False, 2),
        (3, 72, 24, False, 1),
        (5, 72, 40, True, 2),
        (5, 120, 40, True, 1),
        (5, 120, 40, True, 1),
        (3, 240, 80, False, 2),
        (3, 200, 80, False, 1),
        (3, 184, 80, False, 1),
        (3, 184, 80, False, 1),
        (3, 480, 112, True, 1),
        (3, 672, 112, True, 1),
        (5, 672, 160, True, 2),
        (5, 960, 160, True, 1),
        (5, 960, 160, True, 1),
    ]
    nodes = [_conv(input_channels, 16, 3, 2, 1), _bn(16), _node("HARDSWISH", 16)]
    cin = 16
    for k, expanded, cout, use_se, stride in rows:
        if expanded != cin:
            nodes += [_conv(cin, expanded, 1), _bn(expanded)]
        nodes += [_conv(expanded, expanded, k, stride, k // 2, groups=expanded), _bn(expanded)]
        if use_se:
            squeeze = _make_divisible(expanded // 4)
            nodes += [
                _node("GLOBALAVGPOOL", expanded),
                _conv(expanded, squeeze, 1, bias=True), _node("RELU", squeeze),
                _conv(squeeze, expanded, 1, bias=True), _node("HARDSIGMOID", expanded),
                _node("SCALE", expanded),
            ]
        nodes += [_conv(expanded, cout, 1), _bn(cout)]
        cin = cout
    final = 6 * cin
    nodes += [_conv(cin, final, 1), _bn(final), _node("HARDSWISH", final)]
    nodes += [
        _node("GLOBALAVGPOOL", final),
        _linear(final, 1280), _node("HARDSWISH", 1280), _node("DROPOUT", 1280),
        _linear(1280, num_classes),
    ]
    return nodes


def describe_architecture(
    name: ArchName | str, num_classes: int = 1000, input_channels: int = 3
) -> ArchDescriptor:
    """Full layer graph of a zoo architecture, exact for parameter counting."""
    try:
        name = ArchName(name)
    except ValueError:
        raise UnknownArchitecture(str(name)) from None
    builders = {
        ArchName.RESNET18: lambda: _describe_resnet_basic([2, 2, 2, 2], num_classes, input_channels),
        ArchName.RESNET34: lambda: _describe_resnet_basic([3, 4, 6, 3], num_classes, input_channels),
        ArchName.RESNET50: lambda: _describe_resnet_bottleneck([3, 4, 6, 3], num_classes, input_channels),
        ArchName.DENSENET121: lambda: _describe_densenet121(num_classes, input_channels),
        ArchName.INCEPTIONV3: lambda: _describe_inception_v3(num_classes, input_channels),
        ArchName.MOBILENETV3: lambda: _describe_mobilenet_v3_large(num_classes, input_channels),
    }
    return ArchDescriptor(name, num_classes, input_channels, builders[name]())


def zoo_parameter_table(num_classes: int = 1000, input_channels: int = 3):
    """(display name, count, relative ratio) rows for all six architectures."""
    counts = {
        name: count_parameters(describe_architecture(name, num_classes, input_channels))
        for name in ArchName
    }
    ratios = relative_parameters(counts)
    rows = [(DISPLAY_NAMES[name], counts[name], ratios[name]) for name in ArchName]
    rows.sort(key=lambda r: r[0])
    return rows


# --- trainable residual network -------------------------------------------

class _BasicBlock(object):
    """Two 3x3 conv+bn with ReLU, identity or 1x1-projection shortcut."""

    def __init__(self, cin: int, cout: int, stride: int, seed: int):
        self.conv1 = Conv2d(cin, cout, 3, stride, 1, bias=False, init_seed=derive_seed(seed, 0, 1))
        self.bn1 = BatchNorm2d(cout)
        self.relu1 = ReLU()
        self.conv2 = Conv2d(cout, cout, 3, 1, 1, bias=False, init_seed=derive_seed(seed, 0, 2))
        self.bn2 = BatchNorm2d(cout)
        if stride != 1 or cin != cout:
            self.proj_conv = Conv2d(cin, cout, 1, stride, 0, bias=False, init_seed=derive_seed(seed, 0, 3))
            self.proj_bn = BatchNorm2d(cout)
        else:
            self.proj_conv = None
            self.proj_bn = None
        self.add = Add()
        self.relu2 = ReLU()

    def forward(self, x, mode):
        y = self.relu1.forward(self.bn1.forward(self.conv1.forward(x, mode), mode), mode)
        y = self.bn2.forward(self.conv2.forward(y, mode), mode)
        shortcut = x
        if self.proj_conv is not None:
            shortcut = self.proj_bn.forward(self.proj_conv.forward(x, mode), mode)
        return self.relu2.forward(self.add.forward(y, shortcut, mode), mode)

    def backward(self, grad):
        grad = self.relu2.backward(grad)
        grad_main, grad_short = self.add.backward(grad)
        grad_main = self.conv2.backward(self.bn2.backward(grad_main))
        grad_main = self.conv1.backward(self.bn1.backward(self.relu1.backward(grad_main)))
        if self.proj_conv is not None:
            grad_short = self.proj_conv.backward(self.proj_bn.backward(grad_short))
        return grad_main + grad_short

    def named_layers(self):
        out = [("conv1", self.conv1), ("bn1", self.bn1), ("conv2", self.conv2), ("bn2", self.bn2)]
        if self.proj_conv is not None:
            out += [("proj_conv", self.proj_conv), ("proj_bn", self.proj_bn)]
        return out


class ResNetModel(object):
    """Trainable residual classifier built by build_mini_resnet.

    Exposes the class-activation-map contract: a global-average-pool tail
    feeding one linear head, with the pre-pool feature maps retained from
    the latest forward pass.
    """

    def __init__(self, stage_blocks, base_channels, input_side, input_channels,
                 num_classes, init_seed: int = 0):
        if not stage_blocks or any(n < 1 for n in stage_blocks):
            raise BadConfig("stage_blocks must be a non-empty list of positive ints")
        if base_channels < 1 or input_side < 8 or input_channels < 1 or num_classes < 2:
            raise BadConfig("bad builder configuration")
        self.input_side = input_side
        self.input_channels = input_channels
        self.num_classes = num_classes
        self.big_stem = input_side >= 128
        if self.big_stem:
            self.stem_conv = Conv2d(input_channels, base_channels, 7, 2, 3,
                                    bias=False, init_seed=derive_seed(init_seed, 1, 0))
            self.stem_pool = MaxPool2d(3, 2, 1)
        else:
            self.stem_conv = Conv2d(input_channels, base_channels, 3, 1, 1,
                                    bias=False, init_seed=derive_seed(init_seed, 1, 0))
            self.stem_pool = None
        self.stem_bn = BatchNorm2d(base_channels)
        self.stem_relu = ReLU()
        self.blocks: list[_BasicBlock] = []
        self.block_names: list[str] = []
        cin = base_channels
        for stage, n in enumerate(stage_blocks):
            cout = base_channels * (2 ** stage)
            for b in range(n):
                stride = 2 if (stage > 0 and b == 0) else 1
                seed = derive_seed(init_seed, stage + 2, b)
                self.blocks.append(_BasicBlock(cin, cout, stride, seed))
                self.block_names.append(f"stage{stage + 1}.block{b + 1}")
                cin = cout
        self.feature_channels = cin
        self.gap = GlobalAvgPool2d()
        self.head = Linear(cin, num_classes, bias=True, init_seed=derive_seed(init_seed, 99, 0))
        self.last_features: np.ndarray | None = None

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        y = self.stem_relu.forward(self.stem_bn.forward(self.stem_conv.forward(x, mode), mode), mode)
        if self.stem_pool is not None:
            y = self.stem_pool.forward(y, mode)
        for block in self.blocks:
            y = block.forward(y, mode)
        self.last_features = y
        pooled = self.gap.forward(y, mode)
        return self.head.forward(pooled, mode)

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        grad = self.gap.backward(self.head.backward(grad_logits))
        for block in reversed(self.blocks):
            grad = block.backward(grad)
        if self.stem_pool is not None:
            grad = self.stem_pool.backward(grad)
        grad = self.stem_conv.backward(self.stem_bn.backward(self.stem_relu.backward(grad)))
        return grad

    def _named_layers(self):
        out = [("stem.conv", self.stem_conv), ("stem.bn", self.stem_bn)]
        for name, block in zip(self.block_names, self.blocks):
            out += [(f"{name}.{lname}", layer) for lname, layer in block.named_layers()]
        out.append(("head", self.head))
        return out

    def parameters(self):
        out = []
        for name, layer in self._named_layers():
            for pname, p in layer.params():
                out.append((f"{name}.{pname}", p))
        return out

    def state_tensors(self):
        out = [(name, p.data) for name, p in self.parameters()]
        for name, layer in self._named_layers():
            if isinstance(layer, BatchNorm2d):
                for sname, arr in layer.state():
                    out.append((f"{name}.{sname}", arr))
        return out

    def zero_grad(self):
        for _, p in self.parameters():
            p.zero_grad()


def build_mini_resnet(stage_blocks, base_channels, input_side, input_channels,
                      num_classes, init_seed: int = 0) -> ResNetModel:
    """Residual classifier: 7x7/2 stem + maxpool for inputs >= 128 pixels,
    3x3/1 stem otherwise; basic blocks doubling channels per stage; global
    average pool and a linear head."""
    return ResNetModel(stage_blocks, base_channels, input_side, input_channels,
                       num_classes, init_seed)
