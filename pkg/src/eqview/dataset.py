"""Curation: view-name standardization, set audits, splits, and statistics.

A "set" is one horse's examination; it is complete when it contains exactly
one radiograph of each of the 48 views.  Splits are assigned per set, never
per image, so no horse straddles train/validation/test.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from . import taxonomy
from .rng import SplitMix64
from .taxonomy import ViewLabel

CSV_COLUMNS = (
    "set_id",
    "file",
    "raw_view",
    "label",
    "has_marker",
    "redacted",
    "quarter_turns",
    "mirror",
    "split",
)


class Split(str, Enum):
    TRAIN = "TRAIN"
    VAL = "VAL"
    TEST = "TEST"


class AuditStatus(str, Enum):
    COMPLETE = "COMPLETE"
    INCOMPLETE = "INCOMPLETE"


class CountMismatch(ValueError):
    """Split counts do not sum to the number of sets."""


class BadRecordRow(ValueError):
    """A metadata CSV row is malformed."""


@dataclass
class RadiographRecord:
    """Per-image curation metadata."""

    set_id: str
    file: str
    raw_view: str
    label: ViewLabel
    has_marker: bool = False
    redacted: bool = False
    quarter_turns: int = 0
    mirror: bool = False
    split: Split | None = None


@dataclass
class SetAudit:
    set_id: str
    status: AuditStatus
    missing: list[ViewLabel] = field(default_factory=list)
    duplicated: list[ViewLabel] = field(default_factory=list)


def standardize_view_name(raw: str) -> ViewLabel:
    """Normalize a raw header string and parse it as one of the 48 views.

    Case-folds, trims, collapses whitespace, and applies the fixed alias
    table (LEFT/RIGHT to L/R, HOOF to FOOT) before parsing.  Unknown text
    raises UnknownLabel; callers route such records to a rejects report.
    """
    return taxonomy.parse_label(raw)


def audit_set(set_id: str, records: list[RadiographRecord]) -> SetAudit:
    """COMPLETE iff each of the 48 views occurs exactly once in the set."""
    counts = Counter(taxonomy.class_index(r.label) for r in records)
    missing = [lb for lb in taxonomy.all_labels() if counts[taxonomy.class_index(lb)] == 0]
    duplicated = [lb for lb in taxonomy.all_labels() if counts[taxonomy.class_index(lb)] > 1]
    status = AuditStatus.COMPLETE if not missing and not duplicated else AuditStatus.INCOMPLETE
    return SetAudit(set_id=set_id, status=status, missing=missing, duplicated=duplicated)


def audit_records(records: list[RadiographRecord]) -> list[SetAudit]:
    """Audit every set present in the record list, sorted by set id."""
    by_set: dict[str, list[RadiographRecord]] = {}
    for rec in records:
        by_set.setdefault(rec.set_id, []).append(rec)
    return [audit_set(set_id, by_set[set_id]) for set_id in sorted(by_set)]


def split_sets(
    set_ids: list[str], counts: tuple[int, int, int], seed: int
) -> dict[str, Split]:
    """Deterministic partition of set ids into train/val/test.

    Ids are sorted lexicographically, shuffled by a seeded Fisher-Yates,
    and assigned contiguously: the first n_train to TRAIN, the next n_val
    to VAL, the remaining n_test to TEST.
    """
    n_train, n_val, n_test = counts
    if n_train < 0 or n_val < 0 or n_test < 0:
        raise CountMismatch("split counts must be non-negative")
    if n_train + n_val + n_test != len(set_ids):
        raise CountMismatch(
            f"counts {counts} sum to {n_train + n_val + n_test}, "
            f"but there are {len(set_ids)} sets"
        )
    if len(set(set_ids)) != len(set_ids):
        raise ValueError("set ids must be unique")
    ordered = sorted(set_ids)
    SplitMix64(seed).shuffle(ordered)
    assignment: dict[str, Split] = {}
    for i, set_id in enumerate(ordered):
        if i < n_train:
            assignment[set_id] = Split.TRAIN
        elif i < n_train + n_val:
            assignment[set_id] = Split.VAL
        else:
            assignment[set_id] = Split.TEST
    return assignment


def apply_split(records: list[RadiographRecord], assignment: dict[str, Split]) -> None:
    for rec in records:
        rec.split = assignment[rec.set_id]


@dataclass
class LabelSplitStats:
    label: ViewLabel
    split: Split
    count: int
    marker_fraction: float
    redaction_fraction: float


@dataclass
class DatasetStats:
    rows: list[LabelSplitStats]
    overall_marker_fraction: float
    overall_redaction_fraction: float


def dataset_stats(records: list[RadiographRecord]) -> DatasetStats:
    """Per-(label, split) count and marker/redaction fractions, plus overall."""
    groups: dict[tuple[int, Split], list[RadiographRecord]] = {}
    for rec in records:
        if rec.split is None:
            continue
        groups.setdefault((taxonomy.class_index(rec.label), rec.split), []).append(rec)
    rows = []
    for (cls, split) in sorted(groups, key=lambda k: (k[0], k[1].value)):
        recs = groups[(cls, split)]
        n = len(recs)
        rows.append(
            LabelSplitStats(
                label=taxonomy.label_from_index(cls),
                split=split,
                count=n,
                marker_fraction=sum(r.has_marker for r in recs) / n,
                redaction_fraction=sum(r.redacted for r in recs) / n,
            )
        )
    total = len(records)
    overall_marker = sum(r.has_marker for r in records) / total if total else 0.0
    overall_redacted = sum(r.redacted for r in records) / total if total else 0.0
    return DatasetStats(rows, overall_marker, overall_redacted)


def _bool_field(value: str, column: str) -> bool:
    if value in ("0", "1"):
        return value == "1"
    raise BadRecordRow(f"column {column} must be 0 or 1, got {value!r}")


def records_to_csv(records: list[RadiographRecord]) -> str:
    """Serialize to the metadata CSV schema (header mandatory, UTF-8)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(
            [
                rec.set_id,
                rec.file,
                rec.raw_view,
                rec.label.render(),
                int(rec.has_marker),
                int(rec.redacted),
                rec.quarter_turns,
                int(rec.mirror),
                rec.split.value if rec.split else "",
            ]
        )
    return buf.getvalue()


def records_from_csv(text: str) -> list[RadiographRecord]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise BadRecordRow("empty CSV") from None
    if tuple(header) != CSV_COLUMNS:
        raise BadRecordRow(f"unexpected header {header!r}")
    records = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            raise BadRecordRow(f"row has {len(row)} fields: {row!r}")
        set_id, file, raw_view, label, marker, redacted, turns, mirror, split = row
        records.append(
            RadiographRecord(
                set_id=set_id,
                file=file,
                raw_view=raw_view,
                label=taxonomy.parse_label(label),
                has_marker=_bool_field(marker, "has_marker"),
                redacted=_bool_field(redacted, "redacted"),
                quarter_turns=int(turns),
                mirror=_bool_field(mirror, "mirror"),
                split=Split(split) if split else None,
            )
        )
    return records
