"""The 48-view taxonomy of the pre-import examination protocol.

A view is identified by laterality (L/R), limb (FORE/HIND), anatomical
region, and projection.  The canonical string form is the uppercase,
single-space-separated rendering used in metadata CSVs and reports,
e.g. ``"L FORE CARPUS DLPMO"``.

Class indices are frozen as the lexicographic order of the canonical
strings, so confusion matrices and reports are reproducible across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache


class UnknownLabel(ValueError):
    """Raised when a label string matches no canonical view or alias."""


class UnknownPair(ValueError):
    """Raised when a (region, projection) pair is not in the protocol."""


class Laterality(str, Enum):
    L = "L"
    R = "R"


class Limb(str, Enum):
    FORE = "FORE"
    HIND = "HIND"


class Region(str, Enum):
    CARPUS = "CARPUS"
    FETLOCK = "FETLOCK"
    TARSUS = "TARSUS"
    STIFLE = "STIFLE"
    FOOT = "FOOT"


# Projections per (limb, region).  Carpus and foot are fore-only, tarsus and
# stifle hind-only; only the fetlock occurs on both limbs.
_PROJECTIONS: dict[tuple[Limb, Region], tuple[str, ...]] = {
    (Limb.FORE, Region.CARPUS): ("DP", "DLPMO", "DMPLO", "FLEXED LM", "FLEXED DP"),
    (Limb.FORE, Region.FETLOCK): ("DP", "DLPMO", "DMPLO", "FLEXED LM", "FLEXED DP", "LM"),
    (Limb.HIND, Region.FETLOCK): ("DP", "DLPMO", "DMPLO", "LM"),
    (Limb.HIND, Region.TARSUS): ("DP", "DLPMO", "DMPLO", "LM"),
    (Limb.HIND, Region.STIFLE): ("LM", "CD CR", "CDL CRMO"),
    (Limb.FORE, Region.FOOT): ("LM", "DP"),
}

# Long-form view names, keyed by (limb, region, projection).
_LONG_FORMS: dict[tuple[Limb, Region, str], str] = {
    (Limb.FORE, Region.CARPUS, "DP"): "dorsopalmar",
    (Limb.FORE, Region.CARPUS, "DLPMO"): "dorsal 55° lateral to palmaromedial oblique",
    (Limb.FORE, Region.CARPUS, "DMPLO"): "dorsal 75° medial to palmarolateral oblique",
    (Limb.FORE, Region.CARPUS, "FLEXED LM"): "flexed lateromedial",
    (Limb.FORE, Region.CARPUS, "FLEXED DP"): "flexed dorsal 60° proximal dorsodistal oblique",
    (Limb.FORE, Region.FETLOCK, "DP"): "dorsopalmar",
    (Limb.FORE, Region.FETLOCK, "DLPMO"): "dorsal 45° lateral to palmaromedial oblique",
    (Limb.FORE, Region.FETLOCK, "DMPLO"): "dorsal 45° medial to palmarolateral oblique",
    (Limb.FORE, Region.FETLOCK, "FLEXED LM"): "flexed lateromedial",
    (Limb.FORE, Region.FETLOCK, "FLEXED DP"): "flexed dorsal 125° distal to palmaroproximal oblique",
    (Limb.FORE, Region.FETLOCK, "LM"): "lateromedial",
    (Limb.HIND, Region.FETLOCK, "DP"): "dorsoplantar",
    (Limb.HIND, Region.FETLOCK, "DLPMO"): "dorsal 45° lateral to pantaromedial oblique",
    (Limb.HIND, Region.FETLOCK, "DMPLO"): "dorsal 45° medial to pantarolateral oblique",
    (Limb.HIND, Region.FETLOCK, "LM"): "lateromedial",
    (Limb.HIND, Region.TARSUS, "DP"): "dorsoplantar",
    (Limb.HIND, Region.TARSUS, "DLPMO"): "dorsal 10° lateral to pantaromedial oblique",
    (Limb.HIND, Region.TARSUS, "DMPLO"): "dorsal 65° medial to pantarolateral oblique",
    (Limb.HIND, Region.TARSUS, "LM"): "lateromedial",
    (Limb.HIND, Region.STIFLE, "LM"): "lateromedial",
    (Limb.HIND, Region.STIFLE, "CD CR"): "caudocranial",
    (Limb.HIND, Region.STIFLE, "CDL CRMO"): "caudolateral to craniomedial oblique",
    (Limb.FORE, Region.FOOT, "LM"): "lateromedial",
    (Limb.FORE, Region.FOOT, "DP"): "dorsal 60° proximal to palmarodistal oblique",
}

# Fixed token-level alias table.  "FOOT" is the canonical hoof token (it is
# what the result tables use); "HOOF" is accepted on input.
_TOKEN_ALIASES: dict[str, str] = {
    "LEFT": "L",
    "RIGHT": "R",
    "HOOF": "FOOT",
}


@dataclass(frozen=True, order=True)
class NeutralViewLabel:
    """A view with the left/right laterality collapsed away (24 values)."""

    limb: Limb
    region: Region
    projection: str

    def render(self) -> str:
        return f"{self.limb.value} {self.region.value} {self.projection}"

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True, order=True)
class ViewLabel:
    """One of the 48 standard views (laterality, limb, region, projection)."""

    laterality: Laterality
    limb: Limb
    region: Region
    projection: str

    def __post_init__(self):
        projections = _PROJECTIONS.get((self.limb, self.region))
        if projections is None or self.projection not in projections:
            raise UnknownLabel(
                f"no such view: {self.laterality.value} {self.limb.value} "
                f"{self.region.value} {self.projection}"
            )

    def render(self) -> str:
        """Canonical uppercase single-space rendering."""
        return (
            f"{self.laterality.value} {self.limb.value} "
            f"{self.region.value} {self.projection}"
        )

    def __str__(self) -> str:
        return self.render()

    def neutral(self) -> NeutralViewLabel:
        return collapse_laterality(self)


@lru_cache(maxsize=1)
def all_labels() -> tuple[ViewLabel, ...]:
    """All 48 views, sorted by canonical rendering (the frozen class order)."""
    labels = [
        ViewLabel(lat, limb, region, proj)
        for (limb, region), projs in _PROJECTIONS.items()
        for proj in projs
        for lat in (Laterality.L, Laterality.R)
    ]
    labels.sort(key=lambda lb: lb.render())
    return tuple(labels)


@lru_cache(maxsize=1)
def all_neutral_labels() -> tuple[NeutralViewLabel, ...]:
    """All 24 laterality-neutral views, sorted by rendering."""
    seen = sorted({collapse_laterality(lb) for lb in all_labels()}, key=lambda n: n.render())
    return tuple(seen)


@lru_cache(maxsize=1)
def _index_by_rendering() -> dict[str, int]:
    return {lb.render(): i for i, lb in enumerate(all_labels())}


NUM_CLASSES = 48
NUM_NEUTRAL_CLASSES = 24


def normalize_label_text(text: str) -> str:
    """Case-fold, trim, collapse whitespace, and apply the token alias table."""
    tokens = text.upper().split()
    return " ".join(_TOKEN_ALIASES.get(tok, tok) for tok in tokens)


def parse_label(text: str) -> ViewLabel:
    """Parse a label string such as ``"L FORE CARPUS DLPMO"``.

    Matching is case-insensitive, collapses repeated whitespace, and accepts
    the fixed aliases (LEFT/RIGHT, HOOF).  Anything else raises UnknownLabel.
    """
    tokens = normalize_label_text(text).split()
    if len(tokens) < 4:
        raise UnknownLabel(f"not a view label: {text!r}")
    lat_tok, limb_tok, region_tok = tokens[0], tokens[1], tokens[2]
    proj = " ".join(tokens[3:])
    try:
        lat = Laterality(lat_tok)
        limb = Limb(limb_tok)
        region = Region(region_tok)
    except ValueError:
        raise UnknownLabel(f"not a view label: {text!r}") from None
    try:
        return ViewLabel(lat, limb, region, proj)
    except UnknownLabel:
        raise UnknownLabel(f"not a view label: {text!r}") from None


def render_label(label: ViewLabel) -> str:
    return label.render()


def collapse_laterality(label: ViewLabel) -> NeutralViewLabel:
    """Drop laterality; mirror pairs collapse to the same neutral view."""
    return NeutralViewLabel(label.limb, label.region, label.projection)


def class_index(label: ViewLabel) -> int:
    """Frozen class index in [0, 48): rank in lexicographic canonical order."""
    return _index_by_rendering()[label.render()]


def label_from_index(index: int) -> ViewLabel:
    return all_labels()[index]


@lru_cache(maxsize=1)
def neutral_index_map() -> tuple[int, ...]:
    """For each class index, the index of its neutral view in [0, 24)."""
    neutral_order = {n: i for i, n in enumerate(all_neutral_labels())}
    return tuple(neutral_order[collapse_laterality(lb)] for lb in all_labels())


def neutral_class_index(label: NeutralViewLabel) -> int:
    order = {n: i for i, n in enumerate(all_neutral_labels())}
    return order[label]


# Region groups as printed in the examination-set table; used by
# expand_abbreviation, where the fetlock needs the limb qualifier.
_REGION_GROUPS: dict[str, tuple[Limb, Region]] = {
    "CARPUS": (Limb.FORE, Region.CARPUS),
    "FORE CARPUS": (Limb.FORE, Region.CARPUS),
    "FORE FETLOCK": (Limb.FORE, Region.FETLOCK),
    "HIND FETLOCK": (Limb.HIND, Region.FETLOCK),
    "TARSUS": (Limb.HIND, Region.TARSUS),
    "HIND TARSUS": (Limb.HIND, Region.TARSUS),
    "STIFLE": (Limb.HIND, Region.STIFLE),
    "HIND STIFLE": (Limb.HIND, Region.STIFLE),
    "FOOT": (Limb.FORE, Region.FOOT),
    "FORE FOOT": (Limb.FORE, Region.FOOT),
}


def expand_abbreviation(region: str, projection: str) -> str:
    """Long-form view name for an anatomical-region / abbreviation pair.

    ``region`` is the region group name ("CARPUS", "FORE FETLOCK", ...);
    the fetlock requires its FORE/HIND qualifier since the long forms differ.
    """
    region_key = normalize_label_text(region)
    proj_key = normalize_label_text(projection)
    group = _REGION_GROUPS.get(region_key)
    if group is None:
        raise UnknownPair(f"unknown region: {region!r}")
    limb, reg = group
    long_form = _LONG_FORMS.get((limb, reg, proj_key))
    if long_form is None:
        raise UnknownPair(f"no projection {projection!r} for region {region!r}")
    return long_form


def long_form_view(label: ViewLabel) -> str:
    """Long-form view name for a full label."""
    return _LONG_FORMS[(label.limb, label.region, label.projection)]
