"""Association tests between classification success and image flags.

Pearson's chi-squared test on 2x2 contingency tables (rows: flag
present/absent, columns: correct/incorrect), its survival-function
p-value for one degree of freedom, and the phi coefficient.  The Yates
continuity correction is on by default for 2x2 tables, matching the
default behaviour of the statistical environment whose outputs are
being reproduced; both modes are exposed.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

from . import taxonomy
from .taxonomy import ViewLabel


class NegativeStatistic(ValueError):
    """chi-squared statistic must be non-negative."""


class ZeroMarginal(ValueError):
    """A marginal total is zero; the association measure is undefined."""


class ZeroMarginalWarning(UserWarning):
    """A marginal total is zero; the statistic degenerates to 0."""


@dataclass(frozen=True)
class ContingencyTable2x2:
    """Counts a, b / c, d; rows are flag present/absent, columns
    correct/incorrect."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise ValueError("counts must be non-negative")
        if self.total < 1:
            raise ValueError("table must contain at least one observation")

    @property
    def total(self) -> int:
        return self.a + self.b + self.c + self.d

    @property
    def marginals(self) -> tuple[int, int, int, int]:
        """(row1, row2, col1, col2) totals."""
        return (self.a + self.b, self.c + self.d, self.a + self.c, self.b + self.d)


def chi2_statistic(table: ContingencyTable2x2, yates_correction: bool = True) -> float:
    """Pearson chi-squared statistic for a 2x2 table.

    Uncorrected: N (ad - bc)^2 / ((a+b)(c+d)(a+c)(b+d)).  With the Yates
    correction, |ad - bc| is replaced by max(|ad - bc| - N/2, 0) before
    squaring.  A zero marginal degenerates to 0 with a warning.
    """
    r1, r2, c1, c2 = table.marginals
    if min(r1, r2, c1, c2) == 0:
        warnings.warn("zero marginal total; statistic is 0", ZeroMarginalWarning,
                      stacklevel=2)
        return 0.0
    n = table.total
    det = table.a * table.d - table.b * table.c
    magnitude = abs(det)
    if yates_correction:
        magnitude = max(magnitude - n / 2, 0.0)
    return n * magnitude * magnitude / (r1 * r2 * c1 * c2)


def chi2_sf(x: float, df: int = 1) -> float:
    """Survival function of the chi-squared distribution with df = 1.

    P(X >= x) = erfc(sqrt(x / 2)); math.erfc carries full double precision
    (far beyond 10 significant digits).
    """
    if df != 1:
        raise ValueError("only df = 1 is supported")
    if x < 0:
        raise NegativeStatistic(f"statistic must be >= 0, got {x}")
    return math.erfc(math.sqrt(x / 2.0))


def phi_coefficient(table: ContingencyTable2x2) -> float:
    """(ad - bc) / sqrt of the marginal product; sign gives the direction
    of the association."""
    r1, r2, c1, c2 = table.marginals
    if min(r1, r2, c1, c2) == 0:
        raise ZeroMarginal("phi undefined with a zero marginal")
    det = table.a * table.d - table.b * table.c
    return det / math.sqrt(r1 * r2 * c1 * c2)


@dataclass
class AssociationRow:
    label: ViewLabel
    n: int
    marker_fraction: float
    correct_fraction: float
    chi2: float | None
    p_value: float | None


def association_by_label(
    records: list[tuple[ViewLabel, bool, bool]]
) -> list[AssociationRow]:
    """Per-label marker/correct fractions with Yates-corrected chi-squared.

    ``records`` are (label, has_marker, correct) triples.  Rows are sorted
    by canonical label.  Degenerate tables (zero marginal) report the
    fractions with chi2/p omitted.
    """
    by_label: dict[int, list[tuple[bool, bool]]] = {}
    for label, has_marker, correct in records:
        by_label.setdefault(taxonomy.class_index(label), []).append((has_marker, correct))
    rows = []
    for cls in sorted(by_label):
        entries = by_label[cls]
        n = len(entries)
        a = sum(1 for m, c in entries if m and c)
        b = sum(1 for m, c in entries if m and not c)
        c_ = sum(1 for m, c in entries if not m and c)
        d = sum(1 for m, c in entries if not m and not c)
        table = ContingencyTable2x2(a, b, c_, d)
        if min(table.marginals) == 0:
            stat, p = None, None
        else:
            stat = chi2_statistic(table, yates_correction=True)
            p = chi2_sf(stat, 1)
        rows.append(
            AssociationRow(
                label=taxonomy.label_from_index(cls),
                n=n,
                marker_fraction=(a + b) / n,
                correct_fraction=(a + c_) / n,
                chi2=stat,
                p_value=p,
            )
        )
    return rows


def format_p_value(p: float | None) -> str:
    """Text rendering; values below 1e-300 print as "<1e-300"."""
    if p is None:
        return ""
    if p < 1e-300:
        return "<1e-300"
    return repr(p)


def association_to_csv(rows: list[AssociationRow]) -> str:
    """CSV mirroring the per-label association table: label, percentage
    with marker, percentage correct, p-value."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "with_marker_pct", "correct_pct", "p_value"])
    for row in rows:
        writer.writerow(
            [
                row.label.render(),
                f"{row.marker_fraction * 100:.4f}",
                f"{row.correct_fraction * 100:.4f}",
                format_p_value(row.p_value),
            ]
        )
    return buf.getvalue()
