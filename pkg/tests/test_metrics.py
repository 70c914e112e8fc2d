"""Precision/success curves and their invariants."""

import csv

import numpy as np
import pytest

from d2cip.metrics import (MetricBundle, center_error, compute_metrics, iou,
                           write_metrics_csv)

from conftest import target


class TestGeometry:
    def test_center_error(self):
        assert center_error(target(0, 0), target(3, 4)) == 5.0
        assert center_error(target(7, 7), target(7, 7)) == 0.0

    def test_iou_identical(self):
        assert iou(target(10, 10, 20, 20), target(10, 10, 20, 20)) == 1.0

    def test_iou_disjoint(self):
        assert iou(target(10, 10, 4, 4), target(100, 100, 4, 4)) == 0.0

    def test_iou_half_shift(self):
        # boxes offset by half a width share 1/3 of their union
        a = target(10, 10, 20, 20)
        b = target(20, 10, 20, 20)
        assert iou(a, b) == pytest.approx(200.0 / 600.0, abs=1e-12)


class TestComputeMetrics:
    def test_truth_as_estimate_is_perfect(self):
        truths = [target(10.0 + i, 20.0, 15, 15) for i in range(8)]
        bundle = compute_metrics(truths, truths)
        assert bundle.precision_at_20 == 1.0
        assert bundle.success_auc == 1.0
        assert np.all(bundle.precision_curve == 1.0)
        assert np.all(bundle.success_curve == 1.0)

    def test_all_lost_is_zero(self):
        truths = [target(10, 10, 6, 6) for _ in range(5)]
        estimates = [target(90, 90, 6, 6) for _ in range(5)]
        bundle = compute_metrics(estimates, truths)
        assert bundle.precision_at_20 == 0.0
        assert bundle.success_auc == 0.0

    def test_two_frame_worked_example(self):
        # frame 1 perfect, frame 2 off by 30 px with zero overlap
        truths = [target(20, 20, 10, 10), target(20, 20, 10, 10)]
        estimates = [target(20, 20, 10, 10), target(50, 20, 10, 10)]
        bundle = compute_metrics(estimates, truths)
        assert bundle.precision_at_20 == 0.5
        assert bundle.success_auc == 0.5

    def test_curve_monotonicity_on_mixed_errors(self):
        rng = np.random.default_rng(3)
        truths = [target(50, 50, 14, 14) for _ in range(40)]
        estimates = [target(50 + dx, 50 + dy, 14, 14)
                     for dx, dy in rng.uniform(-40, 40, size=(40, 2))]
        bundle = compute_metrics(estimates, truths)
        assert np.all(np.diff(bundle.precision_curve) >= 0)
        assert np.all(np.diff(bundle.success_curve) <= 0)

    def test_headline_indices(self):
        # precision headline reads the curve exactly at tau = 20
        truths = [target(0, 0, 10, 10)]
        estimates = [target(19.9, 0, 10, 10)]
        assert compute_metrics(estimates, truths).precision_at_20 == 1.0
        estimates = [target(20.1, 0, 10, 10)]
        assert compute_metrics(estimates, truths).precision_at_20 == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            compute_metrics([], [])
        with pytest.raises(ValueError):
            compute_metrics([target(0, 0)], [target(0, 0), target(1, 1)])


class TestMetricBundle:
    def test_rejects_nonmonotone_curves(self):
        precision = np.linspace(0, 1, 51)
        success = np.linspace(1, 0, 101)
        MetricBundle(precision_curve=precision, success_curve=success, n_frames=1)
        bad_p = precision.copy()
        bad_p[10] = 0.9
        with pytest.raises(ValueError):
            MetricBundle(precision_curve=bad_p, success_curve=success, n_frames=1)
        bad_s = success.copy()
        bad_s[50] = 0.9
        with pytest.raises(ValueError):
            MetricBundle(precision_curve=precision, success_curve=bad_s, n_frames=1)

    def test_rejects_wrong_grid(self):
        with pytest.raises(ValueError):
            MetricBundle(precision_curve=np.ones(50), success_curve=np.ones(101),
                         n_frames=1)


class TestCsv:
    def test_plot_ready_rows(self, tmp_path):
        truths = [target(10, 10, 8, 8) for _ in range(3)]
        bundle = compute_metrics(truths, truths)
        path = tmp_path / "metrics.csv"
        write_metrics_csv(bundle, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["curve", "threshold", "value"]
        precision_rows = [r for r in rows[1:] if r[0] == "precision"]
        success_rows = [r for r in rows[1:] if r[0] == "success"]
        assert len(precision_rows) == 51
        assert len(success_rows) == 101
        assert all(r[2] == "1.0" for r in rows[1:])
