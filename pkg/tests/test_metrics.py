"""IoU, AP (against the brute-force oracle), buckets, and the eval harness."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pointdet.data import Annotation, GeneratorConfig, Scene, generate_dataset
from pointdet.metrics import (
    EvaluationError,
    compute_ap,
    cross_category_fraction,
    evaluate_setting,
    format_report,
    iou,
    save_report,
    scale_bucket,
)
from pointdet.model.decoder import Detection

from oracles import oracle_ap, oracle_assignment_cost, oracle_iou


def _group(gts):
    by_img = {}
    for img, box in gts:
        by_img.setdefault(img, []).append(box)
    return by_img


def _index_within_image(gts, i):
    img = gts[i][0]
    return sum(1 for j in range(i) if gts[j][0] == img)


class TestIoU:
    def test_identical(self):
        assert iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0

    def test_disjoint(self):
        assert iou((0, 0, 5, 5), (10, 10, 2, 2)) == 0.0

    def test_half_shift(self):
        assert abs(iou((0, 0, 10, 10), (5, 0, 10, 10)) - 1.0 / 3.0) < 1e-12

    def test_matches_oracle_on_random_boxes(self, rng):
        for _ in range(200):
            a = tuple(rng.uniform(0, 50, 2)) + tuple(rng.uniform(1, 30, 2))
            b = tuple(rng.uniform(0, 50, 2)) + tuple(rng.uniform(1, 30, 2))
            assert iou(a, b) == oracle_iou(a, b)


class TestScaleBucket:
    def test_examples(self):
        assert scale_bucket((0, 0, 6, 6)) == "vt"
        assert scale_bucket((0, 0, 20, 20)) == "s"
        assert scale_bucket((0, 0, 64, 64)) is None  # right-open boundary
        assert scale_bucket((0, 0, 8, 8)) == "t"
        assert scale_bucket((0, 0, 1, 1)) is None


def _random_instance(rng, n_images=3, max_dets=10, max_gts=6):
    dets, gts = [], []
    for img in range(rng.integers(1, n_images + 1)):
        img_id = f"im{img}"
        for _ in range(rng.integers(0, max_gts + 1)):
            gts.append((img_id, (float(rng.uniform(0, 80)), float(rng.uniform(0, 80)),
                                 float(rng.uniform(2, 40)), float(rng.uniform(2, 40)))))
        for _ in range(rng.integers(0, max_dets + 1)):
            if gts and rng.random() < 0.6:
                _, (x, y, w, h) = gts[rng.integers(0, len(gts))]
                box = (x + rng.normal(0, 4), y + rng.normal(0, 4),
                       max(w + rng.normal(0, 3), 1.0), max(h + rng.normal(0, 3), 1.0))
            else:
                box = (float(rng.uniform(0, 80)), float(rng.uniform(0, 80)),
                       float(rng.uniform(2, 40)), float(rng.uniform(2, 40)))
            dets.append((img_id, box, float(rng.random())))
    return dets, gts


class TestComputeAP:
    def test_single_pair_iou_straddles_thresholds(self):
        # det/gt IoU = 0.6: TP at 0.5, FP at 0.75
        gt_box = (0.0, 0.0, 10.0, 10.0)
        det_box = (0.0, 0.0, 10.0, 6.0)
        assert abs(iou(det_box, gt_box) - 0.6) < 1e-12
        ap50, _ = compute_ap([("a", det_box, 0.9)], [("a", gt_box)], 0.5)
        ap75, _ = compute_ap([("a", det_box, 0.9)], [("a", gt_box)], 0.75)
        assert ap50 == 1.0
        assert ap75 == 0.0

    def test_gt_echo_scores_one_everywhere(self, rng):
        dets, gts = [], []
        for img in range(3):
            for _ in range(4):
                box = (float(rng.uniform(0, 60)), float(rng.uniform(0, 60)),
                       float(rng.uniform(3, 20)), float(rng.uniform(3, 20)))
                gts.append((f"im{img}", box))
                dets.append((f"im{img}", box, 1.0))
        for thr in (0.25, 0.5, 0.75):
            ap, _ = compute_ap(dets, gts, thr)
            assert ap == 1.0

    def test_zero_gts_flagged(self):
        ap, n = compute_ap([("a", (0, 0, 5, 5), 0.5)], [], 0.5)
        assert ap == 0.0 and n == 0

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(7)
        for trial in range(100):
            dets, gts = _random_instance(rng)
            for thr in (0.25, 0.5, 0.75):
                mine, n1 = compute_ap(dets, gts, thr)
                ref, n2 = oracle_ap(dets, gts, thr)
                assert n1 == n2
                assert abs(mine - ref) <= 1e-9, (trial, thr)

    def test_matches_oracle_with_scale_filter(self):
        rng = np.random.default_rng(8)
        for trial in range(60):
            dets, gts = _random_instance(rng)
            for bucket in ("vt", "t", "s", "m"):
                mine, n1 = compute_ap(dets, gts, 0.5, scale_filter=bucket)
                ref, n2 = oracle_ap(dets, gts, 0.5, scale_filter=bucket)
                assert n1 == n2
                assert abs(mine - ref) <= 1e-9, (trial, bucket)

    def test_monotone_in_iou_threshold(self):
        rng = np.random.default_rng(9)
        for _ in range(80):
            dets, gts = _random_instance(rng)
            if not gts:
                continue
            aps = [compute_ap(dets, gts, t)[0] for t in (0.25, 0.5, 0.75)]
            assert aps[0] >= aps[1] >= aps[2]

    def test_low_scored_false_positive_never_raises_ap(self):
        rng = np.random.default_rng(10)
        for _ in range(40):
            dets, gts = _random_instance(rng)
            if not gts:
                continue
            base, _ = compute_ap(dets, gts, 0.5)
            floor_score = min((d[2] for d in dets), default=1.0) / 2
            dets2 = dets + [("im0", (70.0, 70.0, 3.0, 3.0), floor_score)]
            worse, _ = compute_ap(dets2, gts, 0.5)
            assert worse <= base + 1e-12

    def test_top_scored_true_positive_never_lowers_ap(self):
        # echo of a previously-unmatched GT at top score: purely additive TP
        rng = np.random.default_rng(11)
        checked = 0
        for _ in range(60):
            dets, gts = _random_instance(rng)
            if not gts:
                continue
            matched = set()
            order, matches = __import__("pointdet.metrics.ap", fromlist=["_greedy_match"])._greedy_match(
                dets, _group(gts), 0.5)
            for m in matches:
                if m is not None:
                    matched.add(m)
            unmatched = [(i, g) for i, g in enumerate(gts)
                         if (g[0], _index_within_image(gts, i)) not in matched]
            if not unmatched:
                continue
            img, box = unmatched[0][1]
            base, _ = compute_ap(dets, gts, 0.5)
            better, _ = compute_ap([(img, box, 2.0)] + dets, gts, 0.5)
            assert better >= base - 1e-12
            checked += 1
        assert checked >= 10

    def test_single_bucket_gts_equal_unfiltered_ap(self, rng):
        # all GTs in bucket "t": bucket AP == plain AP, other buckets flagged
        dets, gts = [], []
        for i in range(6):
            box = (float(10 * i), 5.0, 10.0, 10.0)
            gts.append(("im0", box))
            if i % 2 == 0:
                dets.append(("im0", box, float(1.0 - 0.1 * i)))
        plain, _ = compute_ap(dets, gts, 0.5)
        bucket, n = compute_ap(dets, gts, 0.5, scale_filter="t")
        assert bucket == plain and n == 6
        for other in ("vt", "s", "m"):
            ap, n = compute_ap(dets, gts, 0.5, scale_filter=other)
            assert ap == 0.0 and n == 0


class TestHungarianOracle:
    def test_200_random_matrices_match_bruteforce(self):
        from pointdet.model import hungarian_match
        rng = np.random.default_rng(12)
        for _ in range(200):
            n = int(rng.integers(1, 8))
            m = int(rng.integers(1, 8))
            cost = rng.standard_normal((n, m)) * 5
            pairs = hungarian_match(cost)
            total = sum(cost[i, j] for i, j in pairs)
            assert abs(total - oracle_assignment_cost(cost.tolist())) < 1e-12


class _GtEcho:
    """Stub detector that returns every prompted-category GT with score 1."""

    def __init__(self, scenes):
        self._scenes = {s.id: s for s in scenes}
        self._by_image = {}
        for s in scenes:
            self._by_image[id(s.image.data.tobytes())] = s
        self._lookup = {s.image.tobytes(): s for s in scenes}

    def detect(self, image, points, categories, score_threshold=None):
        scene = self._lookup[image.tobytes()]
        prompted = set(int(c) for c in categories)
        dets = []
        h, w = scene.height, scene.width
        for (x, y, bw, bh), cat in scene.annotations:
            if cat in prompted:
                box = np.array([(x + bw / 2) / w, (y + bh / 2) / h, bw / w, bh / h])
                dets.append(Detection(box=box, score=1.0, prompt_group=cat))

        class _Out:
            n_query = max(len(dets), 1)

        return dets, _Out()


class TestEvaluateSetting:
    @pytest.fixture(scope="class")
    def scenes(self):
        return generate_dataset(GeneratorConfig(count_range=(4, 9)), 6, seed=21)

    def test_gt_echo_reaches_ap_one(self, scenes):
        model = _GtEcho(scenes)
        for setting in ("S1", "S2", "S3", "S4"):
            report = evaluate_setting(model, scenes, setting, seed=3)
            for thr, ap in report.ap_by_iou.items():
                assert ap == 1.0, (setting, thr)
            for bucket, ap in report.ap_by_scale.items():
                if bucket not in report.empty_buckets:
                    assert ap == 1.0

    def test_empty_dataset_rejected(self, scenes):
        with pytest.raises(EvaluationError):
            evaluate_setting(_GtEcho(scenes), [], "S1")

    def test_gt_echo_has_zero_cross_category_fraction(self, scenes):
        assert cross_category_fraction(_GtEcho(scenes), scenes, seed=1) == 0.0

    def test_report_roundtrip(self, scenes, tmp_path):
        report = evaluate_setting(_GtEcho(scenes), scenes, "S2", seed=0)
        text = format_report(report)
        assert "S2" in text and "0.50" in text
        path = save_report(report, tmp_path / "report.json")
        import json
        data = json.loads(path.read_text())
        assert data["setting"] == "S2"
        assert data["n_images"] == 6
