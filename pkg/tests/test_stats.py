import math

import pytest

from eqview.stats import (
    AssociationRow,
    ContingencyTable2x2,
    NegativeStatistic,
    ZeroMarginal,
    ZeroMarginalWarning,
    association_by_label,
    association_to_csv,
    chi2_sf,
    chi2_statistic,
    format_p_value,
    phi_coefficient,
)
from eqview.rng import SplitMix64
from eqview.taxonomy import all_labels, parse_label


class TestChi2Statistic:
    def test_independent_proportions_zero(self):
        table = ContingencyTable2x2(10, 10, 20, 20)
        assert chi2_statistic(table, yates_correction=False) == 0.0

    def test_hand_formula_uncorrected(self):
        # 60*(100-400)^2 / 30^4 = 6.6667
        table = ContingencyTable2x2(10, 20, 20, 10)
        assert chi2_statistic(table, yates_correction=False) == pytest.approx(
            60 * 300**2 / 30**4
        )
        assert chi2_statistic(table, yates_correction=False) == pytest.approx(6.6667, abs=1e-4)

    def test_hand_formula_yates(self):
        # 60*(300-30)^2 / 30^4 = 5.4
        table = ContingencyTable2x2(10, 20, 20, 10)
        assert chi2_statistic(table, yates_correction=True) == pytest.approx(5.4)

    def test_yates_never_negative(self):
        table = ContingencyTable2x2(5, 5, 5, 6)
        assert chi2_statistic(table, yates_correction=True) >= 0.0

    def test_zero_marginal_warns_and_returns_zero(self):
        table = ContingencyTable2x2(0, 0, 5, 7)
        with pytest.warns(ZeroMarginalWarning):
            assert chi2_statistic(table) == 0.0

    def test_invariant_under_transpose(self):
        rng = SplitMix64(7)
        for _ in range(30):
            a, b, c, d = (rng.randbelow(30) + 1 for _ in range(4))
            t = ContingencyTable2x2(a, b, c, d)
            transposed = ContingencyTable2x2(a, c, b, d)
            swapped = ContingencyTable2x2(d, c, b, a)
            for yates in (False, True):
                assert chi2_statistic(t, yates) == pytest.approx(
                    chi2_statistic(transposed, yates), rel=1e-12
                )
                assert chi2_statistic(t, yates) == pytest.approx(
                    chi2_statistic(swapped, yates), rel=1e-12
                )


class TestChi2Sf:
    def test_reference_value_16_3(self):
        # Reported aggregate side-marker test: chi2(1, N=2016)=16.3, p=5.4e-05.
        assert chi2_sf(16.3, 1) == pytest.approx(5.4e-05, rel=0.02)

    def test_reference_value_102(self):
        # Reported aggregate redaction test: chi2=102, p=5.7e-24.
        assert chi2_sf(102.0, 1) == pytest.approx(5.7e-24, rel=0.05)

    def test_at_zero(self):
        assert chi2_sf(0.0, 1) == 1.0

    def test_strictly_decreasing_and_limits(self):
        xs = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 200.0]
        values = [chi2_sf(x, 1) for x in xs]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert chi2_sf(1000.0, 1) < 1e-200

    def test_matches_mpmath_to_10_digits(self):
        import mpmath

        mpmath.mp.dps = 40
        for x in (0.3, 1.7, 16.3, 42.0, 102.0):
            expected = float(mpmath.erfc(mpmath.sqrt(mpmath.mpf(x) / 2)))
            assert chi2_sf(x, 1) == pytest.approx(expected, rel=1e-10)

    def test_negative_rejected(self):
        with pytest.raises(NegativeStatistic):
            chi2_sf(-1.0, 1)

    def test_df_other_than_one_rejected(self):
        with pytest.raises(ValueError):
            chi2_sf(1.0, 2)


class TestPhi:
    def test_perfect_positive(self):
        assert phi_coefficient(ContingencyTable2x2(5, 0, 0, 5)) == 1.0

    def test_independence_zero(self):
        assert phi_coefficient(ContingencyTable2x2(10, 10, 20, 20)) == 0.0

    def test_hand_value(self):
        table = ContingencyTable2x2(10, 20, 20, 10)
        assert phi_coefficient(table) == pytest.approx(-300 / math.sqrt(810000))
        assert phi_coefficient(table) == pytest.approx(-0.3333, abs=1e-4)

    def test_zero_marginal_rejected(self):
        with pytest.raises(ZeroMarginal):
            phi_coefficient(ContingencyTable2x2(0, 0, 5, 5))

    def test_phi_squared_times_n_equals_uncorrected_chi2(self):
        rng = SplitMix64(21)
        for _ in range(50):
            a, b, c, d = (rng.randbelow(40) + 1 for _ in range(4))
            table = ContingencyTable2x2(a, b, c, d)
            phi = phi_coefficient(table)
            chi2 = chi2_statistic(table, yates_correction=False)
            assert phi * phi * table.total == pytest.approx(chi2, abs=1e-10)

    def test_sign_matches_determinant(self):
        assert phi_coefficient(ContingencyTable2x2(9, 1, 1, 9)) > 0
        assert phi_coefficient(ContingencyTable2x2(1, 9, 9, 1)) < 0


class TestAssociationByLabel:
    def test_reference_fractions(self):
        # 42 records, 10 with marker, 40 correct -> 23.8095% / 95.2381%.
        label = parse_label("L FORE CARPUS DLPMO")
        records = []
        for i in range(42):
            records.append((label, i < 10, i < 40))
        rows = association_by_label(records)
        assert len(rows) == 1
        assert rows[0].marker_fraction == pytest.approx(0.238095, abs=1e-6)
        assert rows[0].correct_fraction == pytest.approx(0.952381, abs=1e-6)

    def test_degenerate_table_omits_p(self):
        label = parse_label("L FORE CARPUS DP")
        records = [(label, True, True) for _ in range(5)]
        rows = association_by_label(records)
        assert rows[0].p_value is None
        assert rows[0].marker_fraction == 1.0
        assert rows[0].correct_fraction == 1.0

    def test_matches_spreadsheet_style_oracle(self):
        # Independent recomputation of fractions and Yates chi2 from raw
        # cell counts for a constructed two-label corpus.
        lb1 = parse_label("L FORE CARPUS DP")
        lb2 = parse_label("R HIND TARSUS LM")
        records = []
        cells = {  # (marker, correct): count
            (True, True): 8, (True, False): 4, (False, True): 20, (False, False): 10,
        }
        for (m, c), n in cells.items():
            records += [(lb1, m, c)] * n
        records += [(lb2, True, True), (lb2, False, False), (lb2, False, True)]
        rows = association_by_label(records)
        assert [r.label for r in rows] == sorted([lb1, lb2], key=lambda l: l.render())
        row1 = next(r for r in rows if r.label == lb1)
        n = 42
        assert row1.n == n
        assert row1.marker_fraction == pytest.approx(12 / 42)
        assert row1.correct_fraction == pytest.approx(28 / 42)
        a, b, c, d = 8, 4, 20, 10
        det = abs(a * d - b * c) - n / 2
        det = max(det, 0.0)
        expected_chi2 = n * det * det / (12 * 30 * 28 * 14)
        assert row1.chi2 == pytest.approx(expected_chi2, rel=1e-12)
        assert row1.p_value == pytest.approx(math.erfc(math.sqrt(expected_chi2 / 2)), rel=1e-12)

    def test_rows_sorted_by_canonical_label(self):
        records = [(lb, False, True) for lb in all_labels()]
        records += [(lb, True, False) for lb in all_labels()]
        rows = association_by_label(records)
        renderings = [r.label.render() for r in rows]
        assert renderings == sorted(renderings)


class TestFormatting:
    def test_small_p_rendering(self):
        assert format_p_value(1e-301) == "<1e-300"
        assert format_p_value(0.25) == "0.25"
        assert format_p_value(None) == ""

    def test_csv_layout(self):
        label = parse_label("L FORE CARPUS DLPMO")
        rows = [AssociationRow(label, 42, 0.238095238, 0.952380952, 5.4, 0.0095)]
        text = association_to_csv(rows)
        lines = text.splitlines()
        assert lines[0] == "label,with_marker_pct,correct_pct,p_value"
        assert lines[1].startswith("L FORE CARPUS DLPMO,23.8095,95.2381,")
