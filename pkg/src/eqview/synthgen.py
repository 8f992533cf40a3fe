"""Procedural 48-class phantom corpus.

Each of the 24 laterality-neutral views gets a distinct procedural
silhouette built from capsules and ellipses (bone-chain archetypes per
region, oblique X-overlays with view-specific angles, flexion chevrons,
joint blobs).  Every silhouette is bilaterally symmetric about the
vertical axis, so mirroring alone carries no laterality information.

Laterality is injected two ways, mimicking the corpus being reproduced:

* a systematic asymmetry: the topmost bone segment of left-limb images is
  scaled by (1 + asymmetry); per-image shape jitter masks the cue, so a
  classifier can learn laterality only imperfectly;
* an optional radiopaque "L"/"R" corner marker, present with the
  configured probability.

Rendering happens in the left-limb anatomical frame; right-limb images
are the horizontal mirror of the rendered raster.  Markers, redaction and
noise are drawn in the anatomical frame too, so with asymmetry 0 and
markers off, render(L) equals mirror(render(R)) bit-exactly at any seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import taxonomy
from .dataset import RadiographRecord
from .imaging import Image16
from .rng import SplitMix64, derive_seed
from .taxonomy import Laterality, Limb, Region, ViewLabel

MAXVAL = 65535

# Jitter magnitudes (per component, per image).  Radius jitter is the noise
# floor that masks the laterality cue; keep it comparable to the default
# asymmetry strength.
_JITTER_RADIUS = 0.05
_JITTER_LENGTH = 0.04
_JITTER_OFFSET = 0.015
_JITTER_VALUE = 0.08
_JITTER_ANGLE_DEG = 2.0


@dataclass(frozen=True)
class PhantomConfig:
    side: int = 250
    marker_prob: float = 0.193
    redact_prob: float = 0.262
    asymmetry: float = 0.05
    noise_amp: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.marker_prob <= 1 or not 0 <= self.redact_prob <= 1:
            raise ValueError("probabilities must be in [0, 1]")
        if not 0 <= self.asymmetry <= 1:
            raise ValueError("asymmetry must be in [0, 1]")
        if self.side < 16:
            raise ValueError("side must be >= 16")


@dataclass
class PhantomRecord:
    image: Image16
    record: RadiographRecord


def _capsule(p0, p1, r, val):
    return {"kind": "capsule", "p0": p0, "p1": p1, "r": r, "val": val}


def _ellipse(c, rx, ry, val):
    return {"kind": "ellipse", "c": c, "rx": rx, "ry": ry, "val": val}


def _xcross(y, angle_deg, length, r, val):
    """Two capsules through (0.5, y) at +/- angle from vertical (symmetric)."""
    a = math.radians(angle_deg)
    dx, dy = math.sin(a) * length / 2, math.cos(a) * length / 2
    return [
        _capsule((0.5 - dx, y - dy), (0.5 + dx, y + dy), r, val),
        _capsule((0.5 + dx, y - dy), (0.5 - dx, y + dy), r, val),
    ]


def _chevron(apex_y, angle_deg, length, r, val):
    """Two capsules from (0.5, apex_y) spreading downwards (symmetric V)."""
    a = math.radians(angle_deg)
    dx, dy = math.sin(a) * length, math.cos(a) * length
    return [
        _capsule((0.5, apex_y), (0.5 - dx, apex_y + dy), r, val),
        _capsule((0.5, apex_y), (0.5 + dx, apex_y + dy), r, val),
    ]


_BONE = 0.62
_OVERLAY = 0.46
_BLOB = 0.74


def _segments(spans, width, val=_BONE):
    return [_capsule((0.5, y0), (0.5, y1), width, val) for y0, y1 in spans]


def neutral_geometry(neutral: taxonomy.NeutralViewLabel) -> list[dict]:
    """Component list of one neutral view; the first component is the
    topmost bone segment, the carrier of the laterality asymmetry."""
    limb, region, proj = neutral.limb, neutral.region, neutral.projection
    if region == Region.CARPUS:
        spans = [(0.22, 0.40), (0.44, 0.62), (0.66, 0.84)]
        if proj == "DP":
            return _segments(spans, 0.085)
        if proj == "DLPMO":
            return _segments(spans, 0.060) + _xcross(0.53, 55, 0.30, 0.025, _OVERLAY)
        if proj == "DMPLO":
            return _segments(spans, 0.070) + _xcross(0.53, 75, 0.30, 0.025, _OVERLAY)
        if proj == "FLEXED LM":
            return _segments(spans, 0.045) + _chevron(0.30, 20, 0.42, 0.035, _OVERLAY)
        if proj == "FLEXED DP":
            return (_segments(spans, 0.075) + _chevron(0.30, 20, 0.42, 0.035, _OVERLAY)
                    + [_ellipse((0.5, 0.53), 0.05, 0.05, _BLOB)])
    if region == Region.FETLOCK and limb == Limb.FORE:
        spans = [(0.22, 0.50), (0.56, 0.84)]
        joint = 0.53
        if proj == "DP":
            return _segments(spans, 0.085) + [_ellipse((0.5, joint), 0.065, 0.065, _BLOB)]
        if proj == "DLPMO":
            return (_segments(spans, 0.060) + _xcross(joint, 45, 0.26, 0.022, _OVERLAY)
                    + [_ellipse((0.5, joint), 0.05, 0.05, _BLOB)])
        if proj == "DMPLO":
            return (_segments(spans, 0.068) + _xcross(joint, 62, 0.26, 0.022, _OVERLAY)
                    + [_ellipse((0.5, joint), 0.05, 0.05, _BLOB)])
        if proj == "FLEXED LM":
            return (_segments(spans, 0.048) + _chevron(0.36, 22, 0.40, 0.030, _OVERLAY)
                    + [_ellipse((0.5, joint), 0.055, 0.055, _BLOB)])
        if proj == "FLEXED DP":
            return (_segments(spans, 0.078) + _chevron(0.36, 18, 0.40, 0.030, _OVERLAY)
                    + [_ellipse((0.5, joint), 0.07, 0.07, _BLOB)])
        if proj == "LM":
            return _segments([(0.22, 0.50), (0.58, 0.84)], 0.052) + [
                _ellipse((0.5, 0.56), 0.08, 0.08, _BLOB)
            ]
    if region == Region.FETLOCK and limb == Limb.HIND:
        spans = [(0.22, 0.56), (0.62, 0.84)]
        joint = 0.59
        bar = _capsule((0.38, 0.30), (0.62, 0.30), 0.020, _OVERLAY)
        if proj == "DP":
            return _segments(spans, 0.082) + [bar, _ellipse((0.5, joint), 0.042, 0.042, _BLOB)]
        if proj == "DLPMO":
            return (_segments(spans, 0.058) + [bar] + _xcross(joint, 40, 0.26, 0.022, _OVERLAY)
                    + [_ellipse((0.5, joint), 0.042, 0.042, _BLOB)])
        if proj == "DMPLO":
            return (_segments(spans, 0.066) + [bar] + _xcross(joint, 68, 0.26, 0.022, _OVERLAY)
                    + [_ellipse((0.5, joint), 0.042, 0.042, _BLOB)])
        if proj == "LM":
            return _segments(spans, 0.050) + [bar, _ellipse((0.5, joint), 0.07, 0.07, _BLOB)]
    if region == Region.TARSUS:
        spans = [(0.30, 0.55), (0.60, 0.84)]
        wedge = _capsule((0.40, 0.24), (0.60, 0.24), 0.045, _BLOB)
        if proj == "DP":
            return _segments(spans, 0.080) + [wedge]
        if proj == "DLPMO":
            return _segments(spans, 0.058) + [wedge] + _xcross(0.575, 10, 0.30, 0.020, _OVERLAY)
        if proj == "DMPLO":
            return _segments(spans, 0.066) + [wedge] + _xcross(0.575, 65, 0.30, 0.020, _OVERLAY)
        if proj == "LM":
            return _segments(spans, 0.048) + [
                _capsule((0.40, 0.24), (0.60, 0.24), 0.055, _BLOB)
            ]
    if region == Region.STIFLE:
        spans = [(0.24, 0.50), (0.58, 0.86)]
        if proj == "LM":
            return _segments(spans, 0.070) + [_ellipse((0.5, 0.54), 0.055, 0.075, _BLOB)]
        if proj == "CD CR":
            return _segments(spans, 0.095) + [_ellipse((0.5, 0.54), 0.090, 0.055, _BLOB)]
        if proj == "CDL CRMO":
            return (_segments(spans, 0.080) + _xcross(0.54, 30, 0.30, 0.025, _OVERLAY)
                    + [_ellipse((0.5, 0.54), 0.070, 0.060, _BLOB)])
    if region == Region.FOOT:
        if proj == "LM":
            return _segments([(0.22, 0.52)], 0.050) + [_ellipse((0.5, 0.70), 0.16, 0.10, _BLOB)]
        if proj == "DP":
            return _segments([(0.22, 0.52)], 0.080) + [_ellipse((0.5, 0.70), 0.20, 0.065, _BLOB)]
    raise taxonomy.UnknownLabel(str(neutral))


def _jitter_components(components: list[dict], rng: SplitMix64) -> list[dict]:
    """Random per-image shape variation, drawn in a fixed component order."""
    out = []
    for comp in components:
        radius_scale = 1.0 + rng.uniform(-_JITTER_RADIUS, _JITTER_RADIUS)
        length_scale = 1.0 + rng.uniform(-_JITTER_LENGTH, _JITTER_LENGTH)
        dx = rng.uniform(-_JITTER_OFFSET, _JITTER_OFFSET)
        dy = rng.uniform(-_JITTER_OFFSET, _JITTER_OFFSET)
        value_scale = 1.0 + rng.uniform(-_JITTER_VALUE, _JITTER_VALUE)
        c = dict(comp)
        c["val"] = comp["val"] * value_scale
        if comp["kind"] == "capsule":
            (x0, y0), (x1, y1) = comp["p0"], comp["p1"]
            mx, my = (x0 + x1) / 2, (y0 + y1) / 2
            c["p0"] = (mx + (x0 - mx) * length_scale + dx, my + (y0 - my) * length_scale + dy)
            c["p1"] = (mx + (x1 - mx) * length_scale + dx, my + (y1 - my) * length_scale + dy)
            c["r"] = comp["r"] * radius_scale
        else:
            c["c"] = (comp["c"][0] + dx, comp["c"][1] + dy)
            c["rx"] = comp["rx"] * radius_scale
            c["ry"] = comp["ry"] * length_scale
        out.append(c)
    return out


def _scale_component(comp: dict, factor: float) -> dict:
    """Scale a component about its own center (the laterality cue)."""
    c = dict(comp)
    if comp["kind"] == "capsule":
        (x0, y0), (x1, y1) = comp["p0"], comp["p1"]
        mx, my = (x0 + x1) / 2, (y0 + y1) / 2
        c["p0"] = (mx + (x0 - mx) * factor, my + (y0 - my) * factor)
        c["p1"] = (mx + (x1 - mx) * factor, my + (y1 - my) * factor)
        c["r"] = comp["r"] * factor
    else:
        c["rx"] = comp["rx"] * factor
        c["ry"] = comp["ry"] * factor
    return c


def _rasterize(components: list[dict], side: int) -> np.ndarray:
    """Max-composite the components onto a float canvas in [0, 1]."""
    coords = (np.arange(side, dtype=np.float64) + 0.5) / side
    xs = coords[None, :]
    ys = coords[:, None]
    edge = 1.0 / side
    canvas = np.zeros((side, side), dtype=np.float64)
    for comp in components:
        if comp["kind"] == "capsule":
            (x0, y0), (x1, y1) = comp["p0"], comp["p1"]
            vx, vy = x1 - x0, y1 - y0
            seg_len2 = vx * vx + vy * vy
            if seg_len2 == 0:
                t = 0.0
            else:
                t = np.clip(((xs - x0) * vx + (ys - y0) * vy) / seg_len2, 0.0, 1.0)
            dist = np.hypot(xs - (x0 + t * vx), ys - (y0 + t * vy))
            alpha = np.clip(0.5 + (comp["r"] - dist) / (2 * edge), 0.0, 1.0)
        else:
            cx, cy = comp["c"]
            # Approximate ellipse SDF: normalized radial distance scaled by
            # the local radius; exact enough for antialiasing.
            norm = np.hypot((xs - cx) / comp["rx"], (ys - cy) / comp["ry"])
            local_r = min(comp["rx"], comp["ry"])
            alpha = np.clip(0.5 + (1.0 - norm) * local_r / (2 * edge), 0.0, 1.0)
        canvas = np.maximum(canvas, alpha * comp["val"])
    return canvas


_GLYPHS = {
    "L": ["10000", "10000", "10000", "10000", "10000", "10000", "11111"],
    "R": ["11110", "10001", "10001", "11110", "10100", "10010", "10001"],
}
_GLYPH_VALUE = 0.95
# Glyph box (anatomical frame, fractions of the side); disjoint from the
# central geometry, which stays inside [0.18, 0.88] even after jitter.
_GLYPH_BOX = (0.04, 0.04, 0.13, 0.16)  # x0, y0, width, height


def _draw_glyph(canvas: np.ndarray, letter: str, mirrored: bool) -> None:
    side = canvas.shape[0]
    rows = _GLYPHS[letter]
    bitmap = np.array([[ch == "1" for ch in row] for row in rows], dtype=bool)
    if mirrored:
        # Pre-flip so the letter reads correctly after the final mirror.
        bitmap = bitmap[:, ::-1]
    x0 = int(_GLYPH_BOX[0] * side)
    y0 = int(_GLYPH_BOX[1] * side)
    w = max(1, int(_GLYPH_BOX[2] * side))
    h = max(1, int(_GLYPH_BOX[3] * side))
    ys = np.arange(h) * bitmap.shape[0] // h
    xs = np.arange(w) * bitmap.shape[1] // w
    patch = bitmap[np.ix_(ys, xs)]
    region = canvas[y0:y0 + h, x0:x0 + w]
    region[patch] = np.maximum(region[patch], _GLYPH_VALUE)


def render_phantom(label: ViewLabel, cfg: PhantomConfig, seed: int) -> PhantomRecord:
    """Render one phantom radiograph, deterministic given (label, cfg, seed)."""
    neutral = taxonomy.collapse_laterality(label)
    neutral_idx = taxonomy.neutral_class_index(neutral)
    geom_rng = SplitMix64(derive_seed(seed, 0, neutral_idx))
    deco_rng = SplitMix64(derive_seed(seed, 1, neutral_idx))

    components = _jitter_components(neutral_geometry(neutral), geom_rng)
    if label.laterality == Laterality.L and cfg.asymmetry > 0:
        components[0] = _scale_component(components[0], 1.0 + cfg.asymmetry)
    canvas = _rasterize(components, cfg.side)

    has_marker = deco_rng.random() < cfg.marker_prob
    redacted = deco_rng.random() < cfg.redact_prob
    mirrored = label.laterality == Laterality.R
    if has_marker:
        _draw_glyph(canvas, label.laterality.value, mirrored)

    if cfg.noise_amp > 0:
        noise_seed = deco_rng.next_u64()
        from .rng import uniform_array

        noise = uniform_array(noise_seed, cfg.side * cfg.side).reshape(cfg.side, cfg.side)
        canvas = canvas + cfg.noise_amp * (2.0 * noise - 1.0)

    if redacted:
        # Bottom corner rectangle in the anatomical frame, so the mirror
        # relationship between the laterality twins is preserved.
        corner_left = deco_rng.random() < 0.5
        rw = int(cfg.side * deco_rng.uniform(0.10, 0.20))
        rh = int(cfg.side * deco_rng.uniform(0.08, 0.16))
        x0 = 0 if corner_left else cfg.side - rw
        y0 = cfg.side - rh
        canvas[y0:, x0:x0 + rw] = 0.0

    if mirrored:
        canvas = canvas[:, ::-1]

    pixels = np.clip(np.rint(canvas * MAXVAL), 0, MAXVAL).astype(np.uint16)
    record = RadiographRecord(
        set_id="",
        file="",
        raw_view=label.render(),
        label=label,
        has_marker=has_marker,
        redacted=redacted,
    )
    return PhantomRecord(Image16(pixels), record)


def generate_corpus(n_sets: int, cfg: PhantomConfig) -> list[PhantomRecord]:
    """n_sets complete examination sets (48 views each), record seeds derived
    from (cfg.seed, set index, class index)."""
    if n_sets < 1:
        raise ValueError("n_sets must be >= 1")
    out = []
    for set_idx in range(n_sets):
        set_id = f"SET{set_idx:04d}"
        for cls_idx, label in enumerate(taxonomy.all_labels()):
            seed = derive_seed(cfg.seed, set_idx, cls_idx)
            rec = render_phantom(label, cfg, seed)
            rec.record.set_id = set_id
            rec.record.file = f"{set_id}/{label.render().replace(' ', '_')}.pgm"
            out.append(rec)
    return out
