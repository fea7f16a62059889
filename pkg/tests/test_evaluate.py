import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flowids.evaluate import (
    REFERENCE_RESULTS,
    compare_report,
    comparison_to_text,
    confusion,
    quantile_thresholds,
    sweep,
)


class TestConfusion:
    def test_hand_counted_example(self):
        cm = confusion([1, 1, 0, 0], [0.9, 0.2, 0.1, 0.6], 0.5)
        assert (cm.tp, cm.fn, cm.tn, cm.fp) == (1, 1, 1, 1)
        assert cm.tpr == 0.5 and cm.fpr == 0.5

    def test_threshold_zero_predicts_all_malicious(self):
        cm = confusion([1, 0, 1], [0.2, 0.4, 0.9], 0.0)
        assert cm.tpr == 1.0 and cm.fpr == 1.0
        assert cm.fn == 0 and cm.tn == 0

    def test_threshold_above_max(self):
        cm = confusion([1, 0, 1], [0.2, 0.4, 0.9], 2.0)
        assert cm.tpr == 0.0 and cm.fpr == 0.0

    def test_tie_classifies_malicious(self):
        cm = confusion([1], [0.5], 0.5)
        assert cm.tp == 1

    def test_count_identities(self):
        rng = np.random.default_rng(0)
        labels = (rng.random(500) < 0.3).astype(int)
        scores = rng.random(500)
        cm = confusion(labels, scores, 0.4)
        assert cm.n == 500
        assert math.isclose(cm.tpr + cm.fnr, 1.0)
        assert math.isclose(cm.fpr + cm.tnr, 1.0)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        labels = (rng.random(100) < 0.5).astype(int)
        scores = rng.random(100)
        perm = rng.permutation(100)
        a = confusion(labels, scores, 0.5)
        b = confusion(labels[perm], scores[perm], 0.5)
        assert (a.tp, a.fp, a.tn, a.fn) == (b.tp, b.fp, b.tn, b.fn)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            confusion([], [], 0.5)

    def test_percent_rows_sum_to_100(self):
        cm = confusion([1, 1, 1, 0, 0, 0, 0], [0.9, 0.4, 0.6, 0.1, 0.8, 0.2, 0.3], 0.5)
        for row in cm.percent_rows():
            assert math.isclose(sum(row), 100.0, abs_tol=0.01)

    def test_single_class_rates_are_nan(self):
        cm = confusion([0, 0], [0.1, 0.9], 0.5)
        assert math.isnan(cm.tpr)
        assert "n/a" in cm.to_text()


class TestSweep:
    def test_single_threshold_consistent(self):
        labels, scores = [1, 0, 1], [0.7, 0.3, 0.2]
        curve = sweep(labels, scores, [0.5])
        cm = confusion(labels, scores, 0.5)
        p = curve.points[0]
        assert (p.tpr, p.fpr, p.fp, p.fn) == (cm.tpr, cm.fpr, cm.fp, cm.fn)

    def test_separated_scores_reach_perfect_point(self):
        labels = [0] * 10 + [1] * 10
        scores = list(np.linspace(0.0, 0.4, 10)) + list(np.linspace(0.6, 1.0, 10))
        curve = sweep(labels, scores, [0.5])
        assert curve.points[0].tpr == 1.0 and curve.points[0].fpr == 0.0

    def test_unsorted_thresholds_rejected(self):
        with pytest.raises(ValueError):
            sweep([1, 0], [0.5, 0.5], [0.6, 0.4])
        with pytest.raises(ValueError):
            sweep([1, 0], [0.5, 0.5], [0.4, 0.4])

    def test_low_fpr_high_fnr_regime(self):
        # anomaly-score shape: a threshold with near-zero FPR and large FNR
        rng = np.random.default_rng(2)
        benign = rng.normal(0.01, 0.003, 5000).clip(0, None)
        anomalous = rng.normal(0.05, 0.04, 500).clip(0, None)
        labels = np.concatenate([np.zeros(5000, int), np.ones(500, int)])
        scores = np.concatenate([benign, anomalous])
        curve = sweep(labels, scores, quantile_thresholds(scores, 401))
        qualifying = [p for p in curve.points if p.fpr <= 0.001 and p.fn / 500 >= 0.3]
        assert qualifying

    @given(
        st.lists(st.tuples(st.integers(0, 1), st.floats(0, 1)), min_size=2, max_size=60),
        st.lists(st.floats(0, 1), min_size=1, max_size=20, unique=True),
    )
    def test_rates_non_increasing_in_threshold(self, pairs, raw_thresholds):
        labels = [l for l, _ in pairs]
        if len(set(labels)) < 2:
            labels[0], labels[1] = 0, 1
        scores = [s for _, s in pairs]
        thresholds = sorted(raw_thresholds)
        curve = sweep(labels, scores, thresholds)
        tprs = [p.tpr for p in curve.points]
        fprs = [p.fpr for p in curve.points]
        assert all(a >= b for a, b in zip(tprs, tprs[1:]))
        assert all(a >= b for a, b in zip(fprs, fprs[1:]))


class TestQuantileThresholds:
    def test_strictly_increasing(self):
        rng = np.random.default_rng(3)
        ts = quantile_thresholds(rng.random(1000))
        assert all(b > a for a, b in zip(ts, ts[1:]))

    def test_constant_scores_collapse(self):
        assert quantile_thresholds(np.ones(10)) == [1.0]


class TestCompareReport:
    def test_single_run_plus_14_reference_rows(self):
        cm = confusion([1, 0], [0.9, 0.1], 0.5)
        rows = compare_report([("this run", cm)])
        assert len(rows) == 1 + 14
        assert sum(1 for r in rows if r.cited) == 14
        assert rows[0].name == "this run" and not rows[0].cited

    def test_reference_dnn_with_ips(self):
        row = next(r for r in REFERENCE_RESULTS if r.name == "DNN with IPs")
        assert row.tpr == 0.9993 and row.fpr == 0.0003

    def test_reference_dnn_without_ips(self):
        row = next(r for r in REFERENCE_RESULTS if r.name == "DNN without IPs")
        assert row.tpr == 0.9677 and row.fpr == 0.0052

    def test_empty_runs_rejected(self):
        with pytest.raises(ValueError):
            compare_report([])

    def test_text_marks_cited_rows(self):
        cm = confusion([1, 0], [0.9, 0.1], 0.5)
        text = comparison_to_text(compare_report([("mine", cm)]))
        lines = text.strip().splitlines()
        assert len(lines) == 1 + 1 + 14
        assert "this run" in lines[1]
        assert all("cited" in line for line in lines[2:])
