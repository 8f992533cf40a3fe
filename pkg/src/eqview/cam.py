"""Class activation maps for GAP-headed classifiers.

For a network ending in global average pooling followed by one linear
head, CAM_c(x, y) = sum_k w[c, k] * f_k(x, y) over the last convolutional
feature maps.  The spatial mean of CAM_c plus the class bias equals the
class logit exactly; that identity is the correctness oracle.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .engine import ShapeMismatch
from .imaging import Image16, write_ppm8


class IncompatibleHead(TypeError):
    """Model does not end in global average pooling + a single linear head."""


@dataclass
class CamMap:
    class_index: int
    grid: np.ndarray      # (hf, wf) at last-conv resolution
    overlay: np.ndarray   # bilinear upsample to the network input resolution
    logit: float


def _check_cam_model(model) -> None:
    for attr in ("gap", "head", "last_features", "input_side"):
        if not hasattr(model, attr):
            raise IncompatibleHead(
                "model must expose a global-average-pool tail with a single "
                f"linear head (missing {attr!r})"
            )


def bilinear_upsample(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear interpolation (visual use only)."""
    h, w = grid.shape
    ys = np.linspace(0, h - 1, out_h) if out_h > 1 else np.zeros(1)
    xs = np.linspace(0, w - 1, out_w) if out_w > 1 else np.zeros(1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = grid[np.ix_(y0, x0)] * (1 - fx) + grid[np.ix_(y0, x1)] * fx
    bottom = grid[np.ix_(y1, x0)] * (1 - fx) + grid[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bottom * fy


def compute_cam(model, batch_input: np.ndarray, class_index: int) -> CamMap:
    """CAM of one input (shape (1, c, h, w)) for the given class.

    Runs an evaluation forward pass (model state untouched) and projects
    the head weights onto the cached last-conv feature maps.
    """
    _check_cam_model(model)
    if batch_input.ndim != 4 or batch_input.shape[0] != 1:
        raise ShapeMismatch(f"expected a single (1, c, h, w) input, got {batch_input.shape}")
    if not 0 <= class_index < model.num_classes:
        raise ValueError(f"class index {class_index} outside [0, {model.num_classes})")
    logits = model.forward(batch_input, mode="eval")
    features = model.last_features[0]  # (k, hf, wf)
    weights = model.head.weight.data[:, class_index]  # (k,)
    grid = np.tensordot(weights, features, axes=([0], [0]))
    overlay = bilinear_upsample(grid, model.input_side, model.input_side)
    return CamMap(
        class_index=class_index,
        grid=grid,
        overlay=overlay,
        logit=float(logits[0, class_index]),
    )


# Two-anchor linear colour ramp, low -> purple, high -> yellow.
_RAMP_LOW = np.array([68.0, 1.0, 84.0])
_RAMP_HIGH = np.array([253.0, 231.0, 37.0])
_ALPHA = 0.5


def render_overlay(cam: CamMap, img: Image16) -> np.ndarray:
    """8-bit colour overlay: min-max-normalized CAM through the purple to
    yellow ramp, alpha-blended (0.5) over the grayscale radiograph."""
    heat = cam.overlay
    if heat.shape != img.pixels.shape:
        raise ShapeMismatch(
            f"CAM overlay {heat.shape} does not match image {img.pixels.shape}"
        )
    lo, hi = float(heat.min()), float(heat.max())
    if hi > lo:
        unit = (heat - lo) / (hi - lo)
    else:
        unit = np.full_like(heat, 0.5)
    colour = _RAMP_LOW[None, None, :] + unit[:, :, None] * (_RAMP_HIGH - _RAMP_LOW)[None, None, :]
    maxval = float(img.pixels.max())
    gray = (img.pixels.astype(np.float64) / maxval * 255.0) if maxval > 0 else img.pixels.astype(np.float64)
    blended = (1 - _ALPHA) * gray[:, :, None] + _ALPHA * colour
    return np.clip(np.rint(blended), 0, 255).astype(np.uint8)


def overlay_to_ppm(cam: CamMap, img: Image16) -> bytes:
    return write_ppm8(render_overlay(cam, img))


def cam_grid_to_csv(cam: CamMap) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in cam.grid:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()
