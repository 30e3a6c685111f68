"""Metric oracles: exhaustive pixel counting and brute-force Hausdorff."""

import math

import numpy as np
import pytest

from taskdenoise.errors import InvalidShapeError
from taskdenoise.metrics import (
    aggregate,
    boundary_pixels,
    classification_report,
    dice,
    evaluate_segmentation_sample,
    hausdorff,
    segmentation_report,
    sensitivity,
    specificity,
    top1_accuracy,
    write_aggregate_csv,
    write_per_sample_csv,
)


def brute_force_boundary(mask):
    """Independent loop oracle: 4-neighbor or image-edge boundary pixels."""
    points = []
    m, n = mask.shape
    for i in range(m):
        for j in range(n):
            if not mask[i, j]:
                continue
            if i in (0, m - 1) or j in (0, n - 1):
                points.append((i, j))
                continue
            if not (mask[i - 1, j] and mask[i + 1, j] and mask[i, j - 1] and mask[i, j + 1]):
                points.append((i, j))
    return points


def brute_force_hausdorff(pred, truth, class_id):
    a = brute_force_boundary(np.asarray(pred) == class_id)
    b = brute_force_boundary(np.asarray(truth) == class_id)
    if not a or not b:
        return None

    def directed(src, dst):
        return max(min(math.dist(p, q) for q in dst) for p in src)

    return max(directed(a, b), directed(b, a))


class TestDice:
    def test_identity_is_one(self):
        lab = np.array([[0, 1], [1, 2]])
        assert dice(lab, lab, 1) == 1.0

    def test_disjoint_is_zero(self):
        pred = np.array([[1, 1], [0, 0]])
        truth = np.array([[0, 0], [1, 1]])
        assert dice(pred, truth, 1) == 0.0

    def test_counting_oracle(self):
        # |A|=6, |B|=4, |A^B|=3 -> 0.6
        pred = np.zeros((4, 4), int)
        truth = np.zeros((4, 4), int)
        pred.ravel()[[0, 1, 2, 3, 4, 5]] = 1
        truth.ravel()[[3, 4, 5, 9]] = 1
        assert dice(pred, truth, 1) == pytest.approx(0.6)

    def test_both_empty_is_one(self):
        assert dice(np.zeros((3, 3), int), np.zeros((3, 3), int), 2) == 1.0

    def test_one_empty_is_zero(self):
        pred = np.zeros((3, 3), int)
        truth = np.zeros((3, 3), int)
        truth[1, 1] = 1
        assert dice(pred, truth, 1) == 0.0

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = rng.integers(0, 3, size=(6, 6))
            b = rng.integers(0, 3, size=(6, 6))
            assert dice(a, b, 1) == dice(b, a, 1)

    def test_extent_mismatch_raises(self):
        with pytest.raises(InvalidShapeError):
            dice(np.zeros((2, 2), int), np.zeros((2, 3), int), 1)


class TestHausdorff:
    def test_identity_is_zero(self):
        lab = np.zeros((5, 5), int)
        lab[1:4, 1:4] = 1
        assert hausdorff(lab, lab, 1) == 0.0

    def test_single_points_345(self):
        pred = np.zeros((5, 6), int)
        truth = np.zeros((5, 6), int)
        pred[0, 0] = 1
        truth[3, 4] = 1
        assert hausdorff(pred, truth, 1) == pytest.approx(5.0)

    def test_empty_side_is_undefined(self):
        pred = np.zeros((4, 4), int)
        truth = np.zeros((4, 4), int)
        truth[1, 1] = 1
        assert hausdorff(pred, truth, 1) is None
        assert hausdorff(truth, pred, 1) is None

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_brute_force_on_random_masks(self, seed):
        rng = np.random.default_rng(seed)
        m, n = rng.integers(3, 13), rng.integers(3, 13)
        pred = (rng.random((m, n)) < 0.35).astype(int)
        truth = (rng.random((m, n)) < 0.35).astype(int)
        expected = brute_force_hausdorff(pred, truth, 1)
        actual = hausdorff(pred, truth, 1)
        if expected is None:
            assert actual is None
        else:
            assert actual == pytest.approx(expected, abs=1e-9)

    def test_symmetric(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = (rng.random((8, 8)) < 0.4).astype(int)
            b = (rng.random((8, 8)) < 0.4).astype(int)
            ha, hb = hausdorff(a, b, 1), hausdorff(b, a, 1)
            assert (ha is None) == (hb is None)
            if ha is not None:
                assert ha == pytest.approx(hb)

    def test_boundary_includes_image_edge(self):
        mask = np.ones((3, 3), bool)
        pts = {tuple(p) for p in boundary_pixels(mask)}
        assert (1, 1) not in pts
        assert len(pts) == 8

    def test_interior_is_not_boundary(self):
        mask = np.zeros((5, 5), bool)
        mask[1:4, 1:4] = True
        pts = {tuple(p) for p in boundary_pixels(mask)}
        assert (2, 2) not in pts
        assert len(pts) == 8


class TestSensitivitySpecificity:
    def test_perfect_prediction(self):
        lab = np.array([[1, 0], [0, 1]])
        assert sensitivity(lab, lab, 1) == 1.0
        assert specificity(lab, lab, 1) == 1.0

    def test_all_background_prediction(self):
        pred = np.zeros((2, 2), int)
        truth = np.array([[1, 0], [0, 1]])
        assert sensitivity(pred, truth, 1) == 0.0
        assert specificity(pred, truth, 1) == 1.0

    def test_hand_built_confusion_counts(self):
        pred = np.array([[1, 1, 0, 0], [1, 0, 0, 0], [0, 0, 1, 1], [0, 0, 0, 0]])
        truth = np.array([[1, 0, 0, 0], [1, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 0]])
        tp = int(((pred == 1) & (truth == 1)).sum())
        fn = int(((pred != 1) & (truth == 1)).sum())
        tn = int(((pred != 1) & (truth != 1)).sum())
        fp = int(((pred == 1) & (truth != 1)).sum())
        assert sensitivity(pred, truth, 1) == pytest.approx(tp / (tp + fn))
        assert specificity(pred, truth, 1) == pytest.approx(tn / (tn + fp))

    def test_absent_class_undefined(self):
        assert sensitivity(np.zeros((2, 2), int), np.zeros((2, 2), int), 1) is None


class TestTop1:
    def test_all_correct(self):
        assert top1_accuracy([0, 1, 2], [0, 1, 2]) == 1.0

    def test_all_wrong(self):
        assert top1_accuracy([1, 2, 0], [0, 1, 2]) == 0.0

    def test_three_of_four(self):
        assert top1_accuracy([0, 1, 2, 2], [0, 1, 2, 0]) == 0.75


class TestAggregate:
    def test_constant_vector_sd_zero(self):
        assert aggregate([2.0, 2.0, 2.0]) == (2.0, 0.0)

    def test_zero_one_closed_form(self):
        mean, sd = aggregate([0.0, 1.0])
        assert mean == 0.5 and sd == 0.5

    def test_single_value_sd_zero(self):
        assert aggregate([3.25]) == (3.25, 0.0)

    def test_population_convention(self):
        values = [1.0, 2.0, 3.0, 4.0]
        mean, sd = aggregate(values)
        assert mean == 2.5
        assert sd == pytest.approx(np.sqrt(np.mean((np.asarray(values) - 2.5) ** 2)))


class TestReportsAndCsv:
    def _sample_metrics(self):
        pred = np.array([[1, 1, 0], [0, 2, 2], [0, 0, 0]])
        truth = np.array([[1, 0, 0], [0, 2, 2], [0, 0, 0]])
        return evaluate_segmentation_sample(pred, truth, num_classes=3)

    def test_sample_metrics_fields(self):
        sm = self._sample_metrics()
        assert set(sm.dice_by_class) == {1, 2}
        assert sm.dice_by_class[2] == 1.0
        assert 0.0 < sm.mean_dice <= 1.0

    def test_segmentation_report_aggregates(self):
        report = segmentation_report([self._sample_metrics()] * 3, num_classes=3)
        assert report.sample_count == 3
        mean, sd = report.aggregates["dice"]
        assert sd == pytest.approx(0.0, abs=1e-12)
        assert mean == pytest.approx(self._sample_metrics().mean_dice)

    def test_undefined_hausdorff_counted(self):
        pred = np.zeros((3, 3), int)
        truth = np.zeros((3, 3), int)
        truth[0, 0] = 1
        report = segmentation_report([evaluate_segmentation_sample(pred, truth, 2)], num_classes=2)
        assert report.hausdorff_undefined == 1
        assert "hausdorff" not in report.aggregates

    def test_classification_report(self):
        report = classification_report([0, 1, 2, 0], [0, 1, 1, 0], num_classes=3)
        assert report.aggregates["top1"][0] == pytest.approx(0.75)

    def test_per_sample_csv_layout(self, tmp_path):
        report = segmentation_report([self._sample_metrics()], num_classes=3)
        path = tmp_path / "m.csv"
        write_per_sample_csv(report, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "sample,class,metric,value"
        assert len(lines) == 1 + 2 * 4  # two classes x four metrics

    def test_aggregate_csv_layout(self, tmp_path):
        report = segmentation_report([self._sample_metrics()], num_classes=3)
        path = tmp_path / "agg.csv"
        write_aggregate_csv({"tc": report, "td": report}, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("scheme,")
        assert lines[1].startswith("tc,") and lines[2].startswith("td,")

    def test_csv_six_significant_digits(self, tmp_path):
        report = classification_report([0, 1, 1], [0, 1, 0], num_classes=2)
        path = tmp_path / "c.csv"
        write_per_sample_csv(report, path)
        assert "0.666667" not in path.read_text()  # values are 0/1 exactly
        mean, _ = report.aggregates["top1"]
        assert f"{mean:.6g}" == "0.666667"
