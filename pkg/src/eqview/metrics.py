"""Accuracy, ROC AUC, confusion analytics, and the laterality decomposition.

The laterality decomposition asks, for each misclassification, whether the
true and predicted classes collapse to the same laterality-neutral view
(a pure left/right swap) or differ in view as well.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import taxonomy


class Empty(ValueError):
    """No samples to score."""


class EmptyMatrix(ValueError):
    """Confusion matrix has no counts."""


class IndexOutOfRange(ValueError):
    """A class index is outside [0, num_classes)."""


class DegenerateLabels(ValueError):
    """Fewer than two classes present; AUC undefined."""


class Unbalanced(ValueError):
    """Per-class bucket thresholds require a balanced test set."""


def top1_accuracy(preds, labels) -> float:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.size == 0 or preds.shape != labels.shape:
        raise Empty(f"bad prediction/label shapes {preds.shape}/{labels.shape}")
    return float(np.mean(preds == labels))


def confusion(preds, labels, num_classes: int = taxonomy.NUM_CLASSES) -> np.ndarray:
    """Counts[true][pred], shape (num_classes, num_classes)."""
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape:
        raise Empty("prediction/label length mismatch")
    for arr, what in ((preds, "prediction"), (labels, "label")):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise IndexOutOfRange(f"{what} index outside [0, {num_classes})")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (labels, preds), 1)
    return cm


def _neutral_map(num_classes: int) -> np.ndarray:
    if num_classes != taxonomy.NUM_CLASSES:
        raise IndexOutOfRange(
            f"laterality analysis is defined for {taxonomy.NUM_CLASSES} classes"
        )
    return np.asarray(taxonomy.neutral_index_map(), dtype=np.int64)


def collapsed_accuracy(cm: np.ndarray) -> float:
    """Accuracy after merging each left/right pair into one neutral view."""
    total = int(cm.sum())
    if total == 0:
        raise EmptyMatrix("no samples in confusion matrix")
    neutral = _neutral_map(cm.shape[0])
    same = neutral[:, None] == neutral[None, :]
    return float(cm[same].sum() / total)


def laterality_error_fraction(cm: np.ndarray) -> float | None:
    """Among misclassifications, the fraction that are pure left/right
    swaps (true and predicted collapse to the same neutral view).

    Returns None (undefined) when there are no errors at all.
    """
    neutral = _neutral_map(cm.shape[0])
    off_diag = cm.copy()
    np.fill_diagonal(off_diag, 0)
    errors = int(off_diag.sum())
    if errors == 0:
        return None
    same = neutral[:, None] == neutral[None, :]
    return float(off_diag[same].sum() / errors)


def binary_auc(scores: np.ndarray, positives: np.ndarray) -> float:
    """Rank-statistic AUC with 0.5 credit for ties (Mann-Whitney)."""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = positives.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("need at least one positive and one negative")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1  # average rank, 1-based
        i = j + 1
    rank_sum = ranks[positives].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def roc_auc_per_class(scores: np.ndarray, labels) -> dict[int, float | None]:
    """One-vs-rest AUC per class; None where a class lacks positives or
    negatives."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.ndim != 2 or scores.shape[0] != labels.shape[0]:
        raise Empty("scores must be (n_samples, n_classes) aligned with labels")
    out: dict[int, float | None] = {}
    for c in range(scores.shape[1]):
        positives = labels == c
        if positives.all() or not positives.any():
            out[c] = None
        else:
            out[c] = binary_auc(scores[:, c], positives)
    return out


def roc_auc_macro_ovr(scores: np.ndarray, labels) -> float:
    """Macro mean of the one-vs-rest AUCs over classes that have at least
    one positive and one negative sample."""
    labels = np.asarray(labels, dtype=np.int64)
    if np.unique(labels).size < 2:
        raise DegenerateLabels("need samples from at least two classes")
    per_class = roc_auc_per_class(scores, labels)
    values = [v for v in per_class.values() if v is not None]
    return float(np.mean(values))


def per_class_buckets(cm: np.ndarray, n_per_class: int) -> tuple[list[int], list[int]]:
    """Classes with high (>= 40/42 scaled) and low (<= 26/42 scaled) correct
    counts.  Thresholds are count-based, scaled proportionally for test
    sets of other balanced sizes and rounded to nearest (half away from 0)."""
    totals = cm.sum(axis=1)
    if not np.all(totals == n_per_class):
        raise Unbalanced(f"per-class totals {sorted(set(totals.tolist()))} != {n_per_class}")
    high_cut = int(np.floor(40 * n_per_class / 42 + 0.5))
    low_cut = int(np.floor(26 * n_per_class / 42 + 0.5))
    correct = np.diag(cm)
    high = [int(c) for c in range(cm.shape[0]) if correct[c] >= high_cut]
    low = [int(c) for c in range(cm.shape[0]) if correct[c] <= low_cut]
    return high, low


@dataclass
class MetricsReport:
    top1: float
    auc_macro_ovr: float | None
    collapsed_top1: float
    laterality_error_fraction: float | None
    per_class_accuracy: list[float]
    high_bucket: list[str] = field(default_factory=list)
    low_bucket: list[str] = field(default_factory=list)
    auc_skipped_classes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "top1": self.top1,
                "auc_macro_ovr": self.auc_macro_ovr,
                "collapsed_top1": self.collapsed_top1,
                "laterality_error_fraction": self.laterality_error_fraction,
                "per_class_accuracy": self.per_class_accuracy,
                "high_bucket": self.high_bucket,
                "low_bucket": self.low_bucket,
                "auc_skipped_classes": self.auc_skipped_classes,
            },
            indent=2,
        )


def build_report(preds, labels, scores: np.ndarray | None = None) -> MetricsReport:
    """Full evaluation report; buckets included only for balanced test sets."""
    cm = confusion(preds, labels)
    totals = cm.sum(axis=1)
    per_class = [
        float(cm[c, c] / totals[c]) if totals[c] else 0.0 for c in range(cm.shape[0])
    ]
    auc = None
    skipped: list[str] = []
    if scores is not None:
        per_cls = roc_auc_per_class(scores, labels)
        values = [v for v in per_cls.values() if v is not None]
        skipped = [
            taxonomy.label_from_index(c).render()
            for c, v in per_cls.items()
            if v is None
        ]
        if len(values) >= 2:
            auc = float(np.mean(values))
    high: list[str] = []
    low: list[str] = []
    if totals.min() == totals.max() and totals.min() > 0:
        hi, lo = per_class_buckets(cm, int(totals[0]))
        high = [taxonomy.label_from_index(c).render() for c in hi]
        low = [taxonomy.label_from_index(c).render() for c in lo]
    return MetricsReport(
        top1=top1_accuracy(preds, labels),
        auc_macro_ovr=auc,
        collapsed_top1=collapsed_accuracy(cm),
        laterality_error_fraction=laterality_error_fraction(cm),
        per_class_accuracy=per_class,
        high_bucket=high,
        low_bucket=low,
        auc_skipped_classes=skipped,
    )


def confusion_to_csv(cm: np.ndarray) -> str:
    """49x49 CSV: header row/column of canonical labels, counts inside."""
    names = [lb.render() for lb in taxonomy.all_labels()]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["true\\pred"] + names)
    for i, name in enumerate(names):
        writer.writerow([name] + [int(v) for v in cm[i]])
    return buf.getvalue()
