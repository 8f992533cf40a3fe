import numpy as np
import pytest

from eqview import taxonomy
from eqview.metrics import (
    DegenerateLabels,
    Empty,
    EmptyMatrix,
    IndexOutOfRange,
    Unbalanced,
    binary_auc,
    build_report,
    collapsed_accuracy,
    confusion,
    confusion_to_csv,
    laterality_error_fraction,
    per_class_buckets,
    roc_auc_macro_ovr,
    top1_accuracy,
)
from eqview.rng import SplitMix64, uniform_array
from eqview.taxonomy import class_index


def brute_force_auc(scores, positives):
    """Pair-counting oracle: concordant pairs + half credit for ties."""
    pos = [s for s, p in zip(scores, positives) if p]
    neg = [s for s, p in zip(scores, positives) if not p]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


def mirror_index(idx):
    lb = taxonomy.label_from_index(idx)
    other = taxonomy.Laterality.R if lb.laterality == taxonomy.Laterality.L else taxonomy.Laterality.L
    return class_index(taxonomy.ViewLabel(other, lb.limb, lb.region, lb.projection))


class TestTop1:
    def test_all_correct(self):
        assert top1_accuracy([1, 2, 3], [1, 2, 3]) == 1.0

    def test_none_correct(self):
        assert top1_accuracy([1, 2, 3], [2, 3, 1]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(Empty):
            top1_accuracy([], [])

    def test_equals_trace_over_total(self):
        rng = SplitMix64(3)
        preds = [rng.randbelow(48) for _ in range(500)]
        labels = [rng.randbelow(48) for _ in range(500)]
        cm = confusion(preds, labels)
        assert top1_accuracy(preds, labels) == pytest.approx(np.trace(cm) / cm.sum())


class TestConfusion:
    def test_perfect_is_diagonal(self):
        labels = list(range(48))
        cm = confusion(labels, labels)
        assert np.array_equal(cm, np.eye(48, dtype=np.int64))

    def test_single_sample(self):
        cm = confusion([7], [3])
        assert cm[3, 7] == 1 and cm.sum() == 1

    def test_matches_hand_tally(self):
        rng = SplitMix64(5)
        preds = [rng.randbelow(48) for _ in range(200)]
        labels = [rng.randbelow(48) for _ in range(200)]
        cm = confusion(preds, labels)
        tally = np.zeros((48, 48), dtype=np.int64)
        for p, t in zip(preds, labels):
            tally[t][p] += 1
        assert np.array_equal(cm, tally)

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            confusion([48], [0])


class TestCollapsed:
    def test_mirror_swaps_count_as_correct(self):
        cm = np.zeros((48, 48), dtype=np.int64)
        for c in range(48):
            cm[c, mirror_index(c)] = 1
        assert collapsed_accuracy(cm) == 1.0

    def test_diagonal_is_one(self):
        cm = np.eye(48, dtype=np.int64) * 3
        assert collapsed_accuracy(cm) == 1.0

    def test_hand_computed_toy(self):
        cm = np.zeros((48, 48), dtype=np.int64)
        cm[0, 0] = 8                      # 8 correct
        cm[0, mirror_index(0)] = 1        # 1 mirror error (collapses correct)
        cm[0, 5] = 1                      # 1 cross-view error
        assert collapsed_accuracy(cm) == pytest.approx(0.9)

    def test_empty_matrix(self):
        with pytest.raises(EmptyMatrix):
            collapsed_accuracy(np.zeros((48, 48), dtype=np.int64))

    def test_collapsed_at_least_top1(self):
        rng = SplitMix64(11)
        for _ in range(20):
            preds = [rng.randbelow(48) for _ in range(100)]
            labels = [rng.randbelow(48) for _ in range(100)]
            cm = confusion(preds, labels)
            assert collapsed_accuracy(cm) >= top1_accuracy(preds, labels)


class TestLateralityErrorFraction:
    def test_only_mirror_errors(self):
        cm = np.zeros((48, 48), dtype=np.int64)
        cm[0, mirror_index(0)] = 5
        cm[3, mirror_index(3)] = 2
        assert laterality_error_fraction(cm) == 1.0

    def test_diagonal_undefined(self):
        cm = np.eye(48, dtype=np.int64)
        assert laterality_error_fraction(cm) is None

    def test_hand_computed_8_of_10(self):
        cm = np.zeros((48, 48), dtype=np.int64)
        cm[0, mirror_index(0)] = 8
        cm[0, 5] = 2
        cm[1, 1] = 100  # correct mass does not matter
        assert laterality_error_fraction(cm) == pytest.approx(0.8)

    def test_in_unit_interval_when_defined(self):
        rng = SplitMix64(13)
        preds = [rng.randbelow(48) for _ in range(300)]
        labels = [rng.randbelow(48) for _ in range(300)]
        frac = laterality_error_fraction(confusion(preds, labels))
        assert frac is not None and 0.0 <= frac <= 1.0


class TestAuc:
    def test_perfect_separation(self):
        scores = np.array([[0.9], [0.8], [0.1], [0.2]])
        assert binary_auc(scores[:, 0], np.array([1, 1, 0, 0], bool)) == 1.0

    def test_inverted_scores(self):
        scores = np.array([0.1, 0.2, 0.9, 0.8])
        assert binary_auc(scores, np.array([1, 1, 0, 0], bool)) == 0.0

    def test_ties_half_credit(self):
        scores = np.array([0.5, 0.5, 0.5, 0.5])
        assert binary_auc(scores, np.array([1, 0, 1, 0], bool)) == 0.5

    def test_matches_pair_counting_oracle_50_cases(self):
        rng = SplitMix64(17)
        for case in range(50):
            n = 6 + rng.randbelow(20)
            k = 3
            raw = uniform_array(rng.next_u64(), n * k).reshape(n, k)
            # quantize to force ties; offset keeps every row sum positive
            scores = np.round(raw * 4) / 4 + 0.25
            scores = scores / scores.sum(axis=1, keepdims=True)
            labels = np.array([rng.randbelow(k) for _ in range(n)])
            if len(set(labels.tolist())) < 2:
                continue
            got = roc_auc_macro_ovr(scores, labels)
            per_class = []
            for c in range(k):
                positives = labels == c
                if positives.any() and not positives.all():
                    per_class.append(brute_force_auc(scores[:, c], positives))
            assert got == pytest.approx(np.mean(per_class), abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = SplitMix64(19)
        scores = uniform_array(23, 30).reshape(10, 3)
        labels = np.array([rng.randbelow(3) for _ in range(10)])
        if len(set(labels.tolist())) < 2:
            labels[0] = 0
            labels[1] = 1
        base = roc_auc_macro_ovr(scores, labels)
        transformed = np.exp(scores * 3.7) + 11.0
        assert roc_auc_macro_ovr(transformed, labels) == pytest.approx(base, abs=1e-12)

    def test_degenerate_labels(self):
        with pytest.raises(DegenerateLabels):
            roc_auc_macro_ovr(np.ones((4, 3)) / 3, np.zeros(4, dtype=int))


class TestBuckets:
    def make_cm(self, correct_counts, n=42):
        cm = np.zeros((48, 48), dtype=np.int64)
        for c in range(48):
            k = correct_counts.get(c, n)
            cm[c, c] = k
            if k < n:
                cm[c, (c + 1) % 48] = n - k
        return cm

    def test_41_of_42_high(self):
        cm = self.make_cm({0: 41})
        high, low = per_class_buckets(cm, 42)
        assert 0 in high and 0 not in low

    def test_26_of_42_low(self):
        cm = self.make_cm({0: 26})
        high, low = per_class_buckets(cm, 42)
        assert 0 in low and 0 not in high

    def test_30_of_42_neither(self):
        cm = self.make_cm({0: 30})
        high, low = per_class_buckets(cm, 42)
        assert 0 not in high and 0 not in low

    def test_thresholds_scale_with_n(self):
        # n=21: high cut round(40*21/42)=20, low cut round(26*21/42)=13.
        cm = self.make_cm({0: 20, 1: 13, 2: 14}, n=21)
        high, low = per_class_buckets(cm, 21)
        assert 0 in high
        assert 1 in low
        assert 2 not in low and 2 not in high

    def test_unbalanced_rejected(self):
        cm = self.make_cm({})
        cm[0, 0] += 1
        with pytest.raises(Unbalanced):
            per_class_buckets(cm, 42)


class TestReport:
    def test_report_fields_and_csv(self):
        rng = SplitMix64(29)
        labels = np.array([rng.randbelow(48) for _ in range(96)])
        preds = labels.copy()
        preds[:10] = [mirror_index(int(c)) for c in labels[:10]]
        scores = np.full((96, 48), 1e-3)
        scores[np.arange(96), preds] = 1.0
        scores /= scores.sum(axis=1, keepdims=True)
        report = build_report(preds, labels, scores)
        assert 0 <= report.top1 <= 1
        assert report.collapsed_top1 >= report.top1
        assert report.laterality_error_fraction == 1.0
        text = report.to_json()
        assert "collapsed_top1" in text
        csv_text = confusion_to_csv(confusion(preds, labels))
        lines = csv_text.splitlines()
        assert len(lines) == 49
        assert lines[0].split(",")[1] == "L FORE CARPUS DLPMO"
