"""Detector component contracts: shapes, invariants, matching, losses."""

import numpy as np
import pytest

from pointdet.autodiff import Tensor, check_gradients, no_grad, tsum
from pointdet.model import (
    ModelConfig,
    PointPromptedDetector,
    allocate_queries,
    build_density_target,
    compute_losses,
    hungarian_match,
    matching_cost,
    top_density_cells,
)
from pointdet.model.density import DensityMap


@pytest.fixture(scope="module")
def model():
    return PointPromptedDetector(ModelConfig(channels=8, hidden=16, heads=2,
                                             decoder_layers=1, ffn_mult=1, seed=3))


@pytest.fixture(scope="module")
def forward_out(model):
    rng = np.random.default_rng(0)
    img = rng.random((3, 128, 128))
    pts = np.array([[30.0, 40.0], [90.0, 100.0]])
    with no_grad():
        return model.forward(img, pts, np.array([0, 1]))


class TestBackbone:
    def test_pyramid_strides(self, model, rng):
        with no_grad():
            p = model.backbone(Tensor(rng.random((3, 128, 128))))
        c = model.config.channels
        assert p.l2.shape == (c, 32, 32)
        assert p.l3.shape == (c, 16, 16)
        assert p.l4.shape == (c, 8, 8)
        assert p.l5.shape == (c, 4, 4)

    def test_zero_image_stays_finite(self, model):
        with no_grad():
            p = model.backbone(Tensor(np.zeros((3, 64, 64))))
        for level in (p.l2, p.l3, p.l4, p.l5):
            assert np.isfinite(level.data).all()

    def test_indivisible_dims_rejected(self, model, rng):
        with pytest.raises(ValueError, match="divisible by 32"):
            model.backbone(Tensor(rng.random((3, 100, 128))))

    def test_gradcheck_through_pyramid(self, rng):
        m = PointPromptedDetector(ModelConfig(channels=4, hidden=8, heads=2,
                                              decoder_layers=1, ffn_mult=1, seed=1))
        img = Tensor(rng.random((3, 32, 32)), requires_grad=True)

        def f(t):
            p = m.backbone(t)
            return tsum(p.l2) + tsum(p.l3) + tsum(p.l4) + tsum(p.l5)

        errs = check_gradients(f, [img], h=1e-5, max_coords=60,
                               rng=np.random.default_rng(5))
        assert max(errs) <= 1e-4


class TestEnhancer:
    def test_stride8_output(self, forward_out):
        assert forward_out.enhanced.s3.shape[1:] == (16, 16)

    def test_deterministic(self, model, rng):
        img = Tensor(rng.random((3, 64, 64)))
        with no_grad():
            a = model.enhancer(model.backbone(img)).s3.data
            b = model.enhancer(model.backbone(img)).s3.data
        np.testing.assert_array_equal(a, b)


class TestPromptEmbedding:
    def test_shape(self, forward_out, model):
        assert forward_out.prompt_embedding.rows.shape == (2, model.config.hidden)

    def test_single_prompt(self, model, rng):
        with no_grad():
            out = model.forward(rng.random((3, 64, 64)), np.array([[20.0, 20.0]]),
                                np.array([0]))
        assert out.prompt_embedding.rows.shape == (1, model.config.hidden)

    def test_empty_prompt_set_rejected(self, model, rng):
        with pytest.raises(ValueError, match="at least one"):
            model.forward(rng.random((3, 64, 64)), np.zeros((0, 2)), np.zeros(0))

    def test_permutation_equivariance(self, model, rng):
        img = rng.random((3, 64, 64))
        pts = np.array([[10.0, 12.0], [40.0, 30.0], [55.0, 50.0]])
        cats = np.array([0, 1, 0])
        perm = [2, 0, 1]
        with no_grad():
            features = model.forward_features(img)
            pe1 = model.prompt_encoder(pts, cats, features[0])
            pe2 = model.prompt_encoder(pts[perm], cats[perm], features[0])
        np.testing.assert_allclose(pe2.rows.data, pe1.rows.data[perm], atol=1e-10)
        np.testing.assert_array_equal(pe2.group_ids, pe1.group_ids[perm])

    def test_pyramid_gradients(self, rng):
        m = PointPromptedDetector(ModelConfig(channels=4, hidden=8, heads=2,
                                              decoder_layers=1, ffn_mult=1, seed=2))
        img = Tensor(rng.random((3, 32, 32)), requires_grad=True)
        pts = np.array([[8.0, 9.0], [20.0, 22.0], [15.0, 4.0]])

        def f(t):
            pe = m.prompt_encoder(pts, np.array([0, 1, 0]), m.backbone(t))
            return tsum(pe.rows)

        errs = check_gradients(f, [img], h=1e-5, max_coords=60,
                               rng=np.random.default_rng(6))
        assert max(errs) <= 1e-4


class TestDensityActivation:
    def test_grid_shape_and_range(self, forward_out):
        dm = forward_out.density
        assert dm.grid.shape == (1, 16, 16)
        assert dm.stride == 8
        assert np.all(dm.grid.data >= 0.0) and np.all(dm.grid.data <= 1.0)

    def test_duplicate_prompts_idempotent(self, model, rng):
        img = rng.random((3, 64, 64))
        with no_grad():
            single = model.forward(img, np.array([[20.0, 25.0]]), np.array([0]))
            double = model.forward(img, np.array([[20.0, 25.0], [20.0, 25.0]]),
                                   np.array([0, 0]))
        np.testing.assert_allclose(double.density.grid.data,
                                   single.density.grid.data, atol=1e-12)

    def test_prompt_permutation_leaves_density_unchanged(self, model, rng):
        img = rng.random((3, 64, 64))
        pts = np.array([[10.0, 12.0], [40.0, 30.0], [55.0, 50.0]])
        cats = np.array([0, 1, 0])
        perm = [1, 2, 0]
        with no_grad():
            a = model.forward(img, pts, cats)
            b = model.forward(img, pts[perm], cats[perm])
        np.testing.assert_allclose(b.density.grid.data, a.density.grid.data, atol=1e-12)


class TestAllocateQueries:
    def _dm(self, total, cells=64):
        grid = np.full((1, 8, 8), total / cells)
        return DensityMap(grid=Tensor(grid))

    def test_rounding(self):
        assert allocate_queries(self._dm(6.4), 1, 300) == 6

    def test_floor_clamp(self):
        assert allocate_queries(self._dm(0.2), 1, 300) == 1

    def test_ceiling_clamp(self):
        assert allocate_queries(self._dm(500.0), 1, 300) == 300

    def test_half_rounds_up(self):
        assert allocate_queries(self._dm(6.5), 1, 300) == 7

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            allocate_queries(self._dm(5.0), 10, 2)


class TestDecode:
    def test_query_count_matches_detections(self, model, forward_out, rng):
        with no_grad():
            out = model.decoder(forward_out.enhanced, forward_out.density,
                                forward_out.prompt_embedding, 5)
        assert out.scores.shape == (5,)
        assert len(out.detections(0.0)) == 5

    def test_top_cell_seeds_reference(self):
        grid = np.zeros((1, 8, 8))
        grid[0, 3, 5] = 0.9
        cells = top_density_cells(grid, 1)
        assert cells[0] == 3 * 8 + 5

    def test_row_major_tie_break(self):
        grid = np.full((1, 4, 4), 0.5)
        cells = top_density_cells(grid, 3)
        np.testing.assert_array_equal(cells, [0, 1, 2])

    def test_box_invariants_over_seeds(self):
        for seed in range(20):
            m = PointPromptedDetector(ModelConfig(channels=8, hidden=16, heads=2,
                                                  decoder_layers=1, ffn_mult=1, seed=seed))
            rng = np.random.default_rng(seed)
            with no_grad():
                out = m.forward(rng.random((3, 64, 64)),
                                rng.uniform(5, 59, (2, 2)), np.array([0, 1]))
            boxes = out.decode.boxes.data
            assert np.all(boxes[:, 2] > 0) and np.all(boxes[:, 3] > 0)
            assert np.all(boxes[:, :2] > 0) and np.all(boxes[:, :2] < 1)
            assert np.all(out.density.grid.data >= 0) and np.all(out.density.grid.data <= 1)

    def test_nquery_exceeding_cells_clamps_with_warning(self, model, forward_out):
        with no_grad():
            out = model.decoder(forward_out.enhanced, forward_out.density,
                                forward_out.prompt_embedding, 10_000)
        assert out.scores.shape[0] == 16 * 16
        assert any("clamped" in w for w in out.warnings)

    def test_detection_set_invariant_under_prompt_permutation(self, model, rng):
        img = rng.random((3, 64, 64))
        pts = np.array([[10.0, 12.0], [40.0, 30.0], [55.0, 50.0]])
        cats = np.array([0, 1, 0])
        with no_grad():
            a = model.forward(img, pts, cats)
            b = model.forward(img, pts[[2, 1, 0]], cats[[2, 1, 0]])
        np.testing.assert_allclose(a.decode.boxes.data, b.decode.boxes.data, atol=1e-10)
        np.testing.assert_allclose(a.decode.scores.data, b.decode.scores.data, atol=1e-10)


class TestHungarian:
    def test_single_cell(self):
        assert hungarian_match(np.array([[3.0]])) == [(0, 0)]

    def test_two_by_two(self):
        pairs = hungarian_match(np.array([[1.0, 2.0], [3.0, 1.0]]))
        assert set(pairs) == {(0, 0), (1, 1)}

    def test_rectangular(self):
        pairs = hungarian_match(np.array([[1.0, 5.0, 2.0], [4.0, 1.0, 3.0]]))
        assert len(pairs) == 2

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            hungarian_match(np.array([[np.inf, 1.0], [1.0, 2.0]]))

    def test_matches_bruteforce_on_random_instances(self, rng):
        from itertools import permutations
        for _ in range(50):
            n, m = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            cost = rng.standard_normal((n, m)) * 10
            pairs = hungarian_match(cost)
            total = sum(cost[i, j] for i, j in pairs)
            k = min(n, m)
            if n <= m:
                best = min(sum(cost[i, p[i]] for i in range(n))
                           for p in permutations(range(m), n))
            else:
                best = min(sum(cost[p[j], j] for j in range(m))
                           for p in permutations(range(n), m))
            assert abs(total - best) < 1e-12


class TestDensityTarget:
    def test_distinct_centers_sum(self):
        annots = [((8.0 * j + 2, 16.0, 4.0, 4.0), 0) for j in range(7)]
        tgt = build_density_target(annots, {0}, 8, (8, 8))
        assert tgt.sum() == 7.0

    def test_collision_clamps(self):
        annots = [((2.0, 2.0, 3.0, 3.0), 0), ((3.0, 3.0, 2.0, 2.0), 0)] + \
                 [((8.0 * j + 17, 40.0, 4.0, 4.0), 0) for j in range(4)]
        tgt = build_density_target(annots, {0}, 8, (8, 8))
        assert tgt.sum() == 5.0
        assert tgt.max() == 1.0

    def test_unprompted_categories_excluded(self):
        annots = [((10.0, 10.0, 4.0, 4.0), 1)]
        tgt = build_density_target(annots, {0}, 8, (8, 8))
        assert tgt.sum() == 0.0


class TestComputeLosses:
    def _perfect_setup(self, model, rng):
        img = rng.random((3, 64, 64))
        pts = np.array([[20.0, 20.0]])
        with no_grad():
            out = model.forward(img, pts, np.array([0]))
        n_q = out.decode.scores.shape[0]
        gt = out.decode.boxes.data.copy()
        out.decode.scores.data[:] = 1.0
        dm_gt = (rng.random(out.density.grid.shape[1:]) > 0.9).astype(float)
        out.density.grid.data[0] = dm_gt
        assignment = [(i, i) for i in range(n_q)]
        return out, assignment, gt, dm_gt

    def test_perfect_prediction(self, model, rng):
        out, assignment, gt, dm_gt = self._perfect_setup(model, rng)
        total, comps = compute_losses(out.decode, assignment, gt, out.density, dm_gt)
        assert comps["reg"] <= 1e-12
        assert comps["cls"] <= 1e-5
        assert comps["density"] <= 1e-5

    def test_lambda_zero_ignores_density(self, model, rng):
        out, assignment, gt, dm_gt = self._perfect_setup(model, rng)
        _, c1 = compute_losses(out.decode, assignment, gt, out.density, dm_gt,
                               density_weight=0.0)
        flipped = 1.0 - dm_gt
        _, c2 = compute_losses(out.decode, assignment, gt, out.density, flipped,
                               density_weight=0.0)
        assert c1["total"] == c2["total"]

    def test_matching_cost_shape(self, rng):
        scores = rng.random(5)
        boxes = np.abs(rng.random((5, 4))) * 0.2 + 0.1
        gts = np.abs(rng.random((3, 4))) * 0.2 + 0.1
        cost = matching_cost(scores, boxes, gts)
        assert cost.shape == (5, 3)
        assert np.isfinite(cost).all()


class TestFullLossGradients:
    def test_all_parameters_match_finite_differences(self):
        m = PointPromptedDetector(ModelConfig(channels=4, hidden=8, heads=2,
                                              decoder_layers=1, ffn_mult=1, seed=4))
        rng = np.random.default_rng(2)
        img = rng.random((3, 32, 32))
        pts = np.array([[10.0, 12.0], [22.0, 20.0]])
        annots = [((8.0, 10.0, 6.0, 6.0), 0), ((20.0, 18.0, 5.0, 5.0), 1)]
        loss_fn = m.pinned_loss_fn(img, pts, np.array([0, 1]), annots, (32, 32))
        params = m.parameters()
        plist = [params[k] for k in sorted(params)]
        errs = check_gradients(loss_fn, plist, h=1e-5,
                               extra_h=(3e-5, 1e-4, 3e-4, 1e-3),
                               max_coords=8, rng=np.random.default_rng(3))
        assert max(errs) <= 1e-4


class TestPersistence:
    def test_save_load_roundtrip_bitwise(self, model, tmp_path, rng):
        path = tmp_path / "model.ckpt"
        model.save(path)
        clone = PointPromptedDetector(model.config)
        clone.load(path)
        img = rng.random((3, 64, 64))
        pts = np.array([[20.0, 30.0]])
        with no_grad():
            a = model.forward(img, pts, np.array([0]))
            b = clone.forward(img, pts, np.array([0]))
        np.testing.assert_array_equal(a.decode.scores.data, b.decode.scores.data)
        np.testing.assert_array_equal(a.decode.boxes.data, b.decode.boxes.data)
