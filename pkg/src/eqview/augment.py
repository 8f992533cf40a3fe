"""Training-time stochastic transforms, deterministic under seeding.

Each sample transform is a pure function of (image, config, seed): random
zoom by nearest-neighbour resampling, a random spatial crop to the output
side, and a random histogram shift realized as a monotone piecewise-linear
intensity remap.  Values are normalized to [0, 1] by the input image
maximum; the output is the normalized real-valued raster.

Zoom/crop magnitudes and the histogram-shift realization are package
defaults, not reported training settings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import Image16
from .rng import SplitMix64, derive_seed  # noqa: F401  (derive_seed re-exported)


class BadInputShape(ValueError):
    """Input raster does not match the configured input side."""


@dataclass(frozen=True)
class AugmentConfig:
    zoom_lo: float = 0.9
    zoom_hi: float = 1.1
    out_side: int = 224
    hist_points: int = 3
    hist_mag: float = 0.1
    enabled: bool = True

    def __post_init__(self):
        if not 0 < self.zoom_lo <= self.zoom_hi:
            raise ValueError("need 0 < zoom_lo <= zoom_hi")
        if self.hist_points < 1:
            raise ValueError("hist_points must be >= 1")
        if not 0 <= self.hist_mag <= 1:
            raise ValueError("hist_mag must be in [0, 1]")


def _resample_nn(values: np.ndarray, target_side: int) -> np.ndarray:
    src_side = values.shape[0]
    idx = np.arange(target_side, dtype=np.int64) * src_side // target_side
    return values[np.ix_(idx, idx)]


def _histogram_shift(values: np.ndarray, rng: SplitMix64, points: int, mag: float) -> np.ndarray:
    """Monotone piecewise-linear remap of [0,1] values through perturbed
    interior control points; endpoints stay fixed at (0,0) and (1,1)."""
    xs = np.linspace(0.0, 1.0, points + 2)
    ys = xs.copy()
    for i in range(1, points + 1):
        ys[i] = min(1.0, max(0.0, xs[i] + rng.uniform(-mag, mag)))
    ys = np.maximum.accumulate(ys)
    return np.interp(values, xs, ys)


def augment_sample(img: Image16, cfg: AugmentConfig, seed: int) -> np.ndarray:
    """One augmented training sample as a (out_side, out_side) float raster.

    Steps: zoom by a factor uniform in [zoom_lo, zoom_hi] (nearest
    neighbour), crop out_side x out_side at uniform offsets fully inside
    the zoomed raster, histogram-shift the max-normalized values.
    """
    pixels = img.pixels
    if pixels.shape[0] != pixels.shape[1]:
        raise BadInputShape(f"expected square input, got {pixels.shape}")
    maxval = float(pixels.max())
    values = pixels.astype(np.float64) / maxval if maxval > 0 else pixels.astype(np.float64)

    rng = SplitMix64(seed)
    factor = rng.uniform(cfg.zoom_lo, cfg.zoom_hi) if cfg.enabled else 1.0
    zoom_side = max(cfg.out_side, int(round(pixels.shape[0] * factor)))
    if zoom_side != pixels.shape[0]:
        values = _resample_nn(values, zoom_side)

    slack = zoom_side - cfg.out_side
    if cfg.enabled:
        off_y = rng.randbelow(slack + 1)
        off_x = rng.randbelow(slack + 1)
    else:
        off_y = off_x = slack // 2
    values = values[off_y:off_y + cfg.out_side, off_x:off_x + cfg.out_side]

    if cfg.enabled and cfg.hist_mag > 0:
        values = _histogram_shift(values, rng, cfg.hist_points, cfg.hist_mag)
    return np.ascontiguousarray(values)


def eval_sample(img: Image16, out_side: int) -> np.ndarray:
    """Deterministic evaluation-time view: center crop + max normalization."""
    cfg = AugmentConfig(zoom_lo=1.0, zoom_hi=1.0, out_side=out_side, hist_mag=0.0,
                        enabled=False)
    return augment_sample(img, cfg, seed=0)
