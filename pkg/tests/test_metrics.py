import numpy as np
import pytest

from agqd.core import Box3D, DetectionSet, RotatedBoxUnsupportedError, ValidationError
from agqd.metrics import (
    SCANNET18_CLASSES,
    EvalConfig,
    average_precision,
    iou_aabb,
    mean_ap,
)


def box(cx, cy=0.0, cz=0.0, sx=1.0, sy=1.0, sz=1.0):
    return Box3D(center=[cx, cy, cz], size=[sx, sy, sz])


def detections(boxes, labels=None, scores=None):
    labels = labels if labels is not None else [0] * len(boxes)
    scores = scores if scores is not None else [1.0] * len(boxes)
    return DetectionSet(tuple(boxes), tuple(labels), tuple(scores))


def greedy_prefix_ap(preds, gts, cfg):
    """AP by re-running greedy matching from scratch for every rank prefix.

    Independent of the single-pass implementation: each prefix recomputes
    the whole matching, yielding one (recall, precision) point, and the
    monotone envelope is integrated over the points.
    """
    order = sorted(range(len(preds)), key=lambda i: (-preds.scores[i], i))
    num_gt = len(gts)
    if num_gt == 0 or not order:
        return 0.0
    points = []
    for prefix in range(1, len(order) + 1):
        matched = [False] * num_gt
        tp = 0
        for i in order[:prefix]:
            best_iou, best_j = 0.0, -1
            for j in range(num_gt):
                if matched[j]:
                    continue
                iou = iou_aabb(preds.boxes[i], gts.boxes[j])
                if iou > best_iou:
                    best_iou, best_j = iou, j
            if best_j >= 0 and best_iou >= cfg.iou_threshold:
                matched[best_j] = True
                tp += 1
        points.append((tp / num_gt, tp / prefix))
    ap = 0.0
    prev_recall = 0.0
    for idx, (recall, _) in enumerate(points):
        if recall > prev_recall:
            ap += (recall - prev_recall) * max(p for _, p in points[idx:])
            prev_recall = recall
    return ap


class TestIouAabb:
    def test_identical_boxes(self):
        b = box(0.3, 0.7, -0.2, 1.3, 0.5, 2.0)
        assert iou_aabb(b, b) == 1.0

    def test_disjoint_boxes(self):
        assert iou_aabb(box(0.0), box(5.0)) == 0.0

    def test_touching_boxes_have_zero_overlap(self):
        assert iou_aabb(box(0.0), box(1.0)) == 0.0

    def test_half_offset_unit_cubes(self):
        assert abs(iou_aabb(box(0.0), box(0.5)) - 1.0 / 3.0) <= 1e-12

    def test_symmetry(self):
        rng = np.random.default_rng(50)
        for _ in range(50):
            a = Box3D(center=rng.uniform(-2, 2, 3), size=rng.uniform(0.1, 3, 3))
            b = Box3D(center=rng.uniform(-2, 2, 3), size=rng.uniform(0.1, 3, 3))
            assert iou_aabb(a, b) == iou_aabb(b, a)

    def test_bounded_by_one_with_equality_only_for_identical(self):
        rng = np.random.default_rng(51)
        for _ in range(50):
            a = Box3D(center=rng.uniform(-1, 1, 3), size=rng.uniform(0.1, 2, 3))
            b = Box3D(center=rng.uniform(-1, 1, 3), size=rng.uniform(0.1, 2, 3))
            iou = iou_aabb(a, b)
            assert 0.0 <= iou <= 1.0
            if iou == 1.0:
                np.testing.assert_array_equal(a.center, b.center)
                np.testing.assert_array_equal(a.size, b.size)

    def test_rotated_boxes_rejected(self):
        tilted = Box3D(center=[0, 0, 0], size=[1, 1, 1], yaw=0.3)
        with pytest.raises(RotatedBoxUnsupportedError):
            iou_aabb(tilted, box(0.0))
        with pytest.raises(RotatedBoxUnsupportedError):
            iou_aabb(box(0.0), tilted)


class TestEvalConfig:
    def test_threshold_bounds(self):
        with pytest.raises(ValidationError):
            EvalConfig(iou_threshold=0.0)
        with pytest.raises(ValidationError):
            EvalConfig(iou_threshold=1.0)

    def test_class_names(self):
        cfg = EvalConfig(classes=SCANNET18_CLASSES)
        assert cfg.class_name(0) == "cabinet"
        assert cfg.class_name(17) == "otherfurniture"
        assert cfg.class_name(99) == "class99"


class TestAveragePrecision:
    def test_perfect_predictions_any_scores(self):
        gts = detections([box(0.0), box(3.0), box(-3.0)])
        preds = detections([box(3.0), box(0.0), box(-3.0)], scores=[0.2, 0.9, 0.5])
        assert average_precision(preds, gts, EvalConfig()) == 1.0

    def test_no_predictions(self):
        gts = detections([box(0.0)])
        assert average_precision(DetectionSet.empty(), gts, EvalConfig()) == 0.0

    def test_no_ground_truth_all_false_positives(self):
        preds = detections([box(0.0)], scores=[0.9])
        assert average_precision(preds, DetectionSet.empty(), EvalConfig()) == 0.0

    def test_hand_curve_two_gt_three_preds(self):
        """TP at 0.9, FP at 0.8, TP at 0.7 -> AP = (1.0 + 2/3) / 2."""
        gts = detections([box(0.0), box(4.0)])
        preds = detections(
            [box(0.01), box(10.0), box(4.01)], scores=[0.9, 0.8, 0.7]
        )
        ap = average_precision(preds, gts, EvalConfig())
        assert abs(ap - (1.0 + 2.0 / 3.0) / 2.0) <= 1e-9

    def test_matches_prefix_recompute_oracle(self):
        rng = np.random.default_rng(52)
        cfg = EvalConfig()
        for _ in range(30):
            n_gt = int(rng.integers(1, 6))
            n_pred = int(rng.integers(0, 10))
            gts = detections([
                Box3D(center=rng.uniform(-4, 4, 3), size=rng.uniform(0.5, 2, 3))
                for _ in range(n_gt)
            ])
            preds = detections(
                [Box3D(center=rng.uniform(-4, 4, 3), size=rng.uniform(0.5, 2, 3))
                 for _ in range(n_pred)],
                scores=list(rng.uniform(0, 1, n_pred)),
            )
            assert average_precision(preds, gts, cfg) == pytest.approx(
                greedy_prefix_ap(preds, gts, cfg), abs=1e-12
            )

    def test_invariant_under_monotone_score_rescaling(self):
        rng = np.random.default_rng(53)
        cfg = EvalConfig()
        gts = detections([box(0.0), box(3.0), box(-4.0)])
        boxes = [Box3D(center=rng.uniform(-5, 5, 3), size=rng.uniform(0.5, 2, 3))
                 for _ in range(8)]
        scores = list(rng.uniform(0.1, 0.9, 8))
        preds = detections(boxes, scores=scores)
        squashed = detections(boxes, scores=[0.25 + s / 2.0 for s in scores])
        assert average_precision(preds, gts, cfg) == average_precision(squashed, gts, cfg)

    def test_duplicate_of_matched_gt_never_increases_ap(self):
        rng = np.random.default_rng(54)
        cfg = EvalConfig()
        for _ in range(25):
            gts = detections([
                Box3D(center=rng.uniform(-4, 4, 3), size=rng.uniform(0.5, 2, 3))
                for _ in range(int(rng.integers(1, 5)))
            ])
            n_pred = int(rng.integers(1, 8))
            boxes = [Box3D(center=rng.uniform(-4, 4, 3), size=rng.uniform(0.5, 2, 3))
                     for _ in range(n_pred)]
            scores = list(rng.uniform(0.2, 1.0, n_pred))
            base = average_precision(detections(boxes, scores=scores), gts, cfg)

            # clone one prediction at a strictly lower score: it reaches any
            # ground truth only after its original already claimed it
            pick = int(rng.integers(0, n_pred))
            dup_boxes = boxes + [boxes[pick]]
            dup_scores = scores + [min(scores) / 2.0]
            with_dup = average_precision(detections(dup_boxes, scores=dup_scores), gts, cfg)
            assert with_dup <= base + 1e-12


class TestMeanAp:
    def test_single_class_perfect(self):
        gts = detections([box(0.0), box(3.0)])
        preds = detections([box(0.0), box(3.0)], scores=[0.9, 0.8])
        per_class, mean = mean_ap([preds], [gts], EvalConfig())
        assert per_class == {0: 1.0}
        assert mean == 1.0

    def test_two_classes_mean_halves(self):
        gts = detections([box(0.0), box(3.0)], labels=[0, 1])
        preds = detections([box(0.0), box(30.0)], labels=[0, 1], scores=[0.9, 0.8])
        per_class, mean = mean_ap([preds], [gts], EvalConfig())
        assert per_class[0] == 1.0
        assert per_class[1] == 0.0
        assert mean == 0.5

    def test_class_absent_from_gt_is_skipped(self):
        gts = detections([box(0.0)], labels=[0])
        preds = detections([box(0.0), box(5.0)], labels=[0, 3], scores=[0.9, 0.99])
        per_class, mean = mean_ap([preds], [gts], EvalConfig())
        assert set(per_class) == {0}
        assert mean == 1.0

    def test_two_scene_fixture_hand_and_oracle(self):
        """Cross-scene pooling with per-scene matching.

        Class 0 ranked pool: FP at 0.95 (scene 2), TP at 0.9 (scene 1),
        FP at 0.8 -> AP 0.25.  Class 1: single TP -> AP 1.0.
        """
        gt1 = detections([box(0.0), box(5.0)], labels=[0, 1])
        gt2 = detections([box(0.0, 5.0)], labels=[0])
        preds1 = detections(
            [box(0.01), box(10.0), box(5.01)],
            labels=[0, 0, 1], scores=[0.9, 0.8, 0.6],
        )
        preds2 = detections([box(10.0, 0.0)], labels=[0], scores=[0.95])

        per_class, mean = mean_ap([preds1, preds2], [gt1, gt2], EvalConfig())
        assert per_class[0] == pytest.approx(0.25, abs=1e-12)
        assert per_class[1] == 1.0
        assert mean == pytest.approx(0.625, abs=1e-12)

        # cross-check class 0 against the prefix oracle on a single pooled
        # pseudo-scene built by separating the scenes far apart in space
        shift = 1000.0
        pooled_gts = detections([box(0.0), box(0.0 + shift, 5.0)])
        pooled_preds = detections(
            [box(0.01), box(10.0), box(10.0 + shift, 0.0)],
            scores=[0.9, 0.8, 0.95],
        )
        assert per_class[0] == pytest.approx(
            greedy_prefix_ap(pooled_preds, pooled_gts, EvalConfig()), abs=1e-12
        )

    def test_scene_count_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            mean_ap([DetectionSet.empty()], [], EvalConfig())

    def test_empty_everything(self):
        per_class, mean = mean_ap([DetectionSet.empty()], [DetectionSet.empty()], EvalConfig())
        assert per_class == {}
        assert mean == 0.0
