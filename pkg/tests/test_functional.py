"""Convolution, attention, bilinear sampling, focal loss: values and gradients."""

import math

import numpy as np
import pytest

from pointdet.autodiff import (
    ProbeError,
    ShapeError,
    Tensor,
    bilinear_sample,
    check_gradients,
    conv2d,
    focal_loss,
    layer_norm,
    multi_head_attention,
    sigmoid,
    tsum,
)


class TestConv2d:
    def test_identity_kernel(self, rng):
        x = Tensor(rng.random((1, 1, 4, 4)))
        k = Tensor(np.ones((1, 1, 1, 1)))
        np.testing.assert_array_equal(conv2d(x, k, 1, 0).data, x.data)

    def test_hand_convolution(self):
        x = Tensor(np.array([[[[1.0, 2.0], [3.0, 4.0]]]]))
        k = Tensor(np.array([[[[1.0, 0.0], [0.0, 1.0]]]]))
        out = conv2d(x, k, 1, 0)
        assert out.shape == (1, 1, 1, 1)
        assert out.item() == 5.0  # 1*1 + 4*1

    def test_output_shape_arithmetic(self, rng):
        x = Tensor(rng.random((2, 3, 9, 11)))
        k = Tensor(rng.random((4, 3, 3, 3)))
        assert conv2d(x, k, 2, 1).shape == (2, 4, 5, 6)

    def test_kernel_gradient_matches_finite_differences(self, rng):
        x = Tensor(rng.standard_normal((1, 2, 5, 5)), requires_grad=True)
        k = Tensor(rng.standard_normal((3, 2, 3, 3)) * 0.5, requires_grad=True)
        errs = check_gradients(lambda a, b: tsum(conv2d(a, b, 1, 1)), [x, k], h=1e-5)
        assert max(errs) <= 1e-4

    def test_strided_gradients(self, rng):
        x = Tensor(rng.standard_normal((1, 2, 7, 6)), requires_grad=True)
        k = Tensor(rng.standard_normal((2, 2, 3, 3)) * 0.5, requires_grad=True)
        errs = check_gradients(lambda a, b: tsum(sigmoid(conv2d(a, b, 2, 1))), [x, k], h=1e-5)
        assert max(errs) <= 1e-4

    def test_channel_mismatch_raises(self, rng):
        with pytest.raises(ShapeError, match="channels"):
            conv2d(Tensor(rng.random((1, 3, 4, 4))), Tensor(rng.random((1, 2, 3, 3))), 1, 1)

    def test_nonpositive_stride_raises(self, rng):
        with pytest.raises(ValueError, match="stride"):
            conv2d(Tensor(rng.random((1, 1, 4, 4))), Tensor(rng.random((1, 1, 3, 3))), 0, 1)

    def test_kernel_larger_than_padded_input_raises(self, rng):
        with pytest.raises(ShapeError, match="larger"):
            conv2d(Tensor(rng.random((1, 1, 2, 2))), Tensor(rng.random((1, 1, 5, 5))), 1, 0)


class TestAttention:
    def test_identical_keys_give_mean_of_values(self, rng):
        k = Tensor(np.tile(rng.standard_normal(6), (5, 1)))
        v = Tensor(rng.standard_normal((5, 6)))
        q = Tensor(rng.standard_normal((3, 6)))
        out = multi_head_attention(q, k, v, heads=1)
        np.testing.assert_allclose(out.data, np.tile(v.data.mean(axis=0), (3, 1)), atol=1e-12)

    def test_single_key_returns_value_row(self, rng):
        q = Tensor(rng.standard_normal((1, 4)))
        k = Tensor(rng.standard_normal((1, 4)))
        v = Tensor(rng.standard_normal((1, 4)))
        out = multi_head_attention(q, k, v, heads=1)
        np.testing.assert_allclose(out.data, v.data, atol=1e-14)

    def test_heads_must_divide_width(self, rng):
        t = Tensor(rng.standard_normal((2, 6)))
        with pytest.raises(ValueError, match="divisible"):
            multi_head_attention(t, t, t, heads=4)

    def test_gradients(self, rng):
        q = Tensor(rng.standard_normal((3, 8)), requires_grad=True)
        k = Tensor(rng.standard_normal((5, 8)), requires_grad=True)
        v = Tensor(rng.standard_normal((5, 8)), requires_grad=True)
        w = Tensor(rng.standard_normal((8, 8)) * 0.4, requires_grad=True)
        errs = check_gradients(
            lambda a, b, c, d: tsum(multi_head_attention(a, b, c, 2, wq=d)),
            [q, k, v, w], h=1e-5)
        assert max(errs) <= 1e-4


class TestBilinearSample:
    def test_integer_coordinates_hit_grid_values(self):
        f = Tensor(np.arange(24.0).reshape(2, 3, 4))
        np.testing.assert_array_equal(bilinear_sample(f, 2.0, 1.0).data, [6.0, 18.0])

    def test_midpoint_averages_four_corners(self):
        f = Tensor(np.array([[[0.0, 1.0], [2.0, 3.0]]]))
        assert bilinear_sample(f, 0.5, 0.5).item() == 1.5

    def test_out_of_range_raises(self):
        f = Tensor(np.zeros((1, 3, 3)))
        with pytest.raises(ValueError, match="outside"):
            bilinear_sample(f, 2.5, 0.0)

    def test_feature_gradient(self, rng):
        f = Tensor(rng.standard_normal((3, 4, 5)), requires_grad=True)
        errs = check_gradients(lambda a: tsum(bilinear_sample(a, 1.3, 2.7)), [f], h=1e-5)
        assert max(errs) <= 1e-4


class TestFocalLoss:
    def test_perfect_prediction_is_tiny(self):
        target = np.array([1.0, 0.0, 1.0])
        loss = focal_loss(Tensor(target.copy()), target, 0.25, 2.0)
        assert loss.item() <= 1e-5

    def test_half_probability_positive_element(self):
        loss = focal_loss(Tensor(np.array([0.5])), np.array([1.0]), 0.25, 2.0)
        expected = 0.25 * 0.25 * math.log(2.0)
        assert abs(loss.item() - expected) < 1e-12

    def test_shape_mismatch_raises(self):
        with pytest.raises(ShapeError):
            focal_loss(Tensor(np.zeros((2, 2))), np.zeros(3))

    def test_gradient_through_sigmoid(self, rng):
        target = (rng.random((8, 8)) > 0.5).astype(float)
        x = Tensor(rng.standard_normal((8, 8)), requires_grad=True)
        errs = check_gradients(lambda a: focal_loss(sigmoid(a), target), [x], h=1e-5)
        assert max(errs) <= 1e-4


class TestLayerNorm:
    def test_normalizes_last_axis(self, rng):
        x = Tensor(rng.standard_normal((4, 8)) * 3 + 1)
        out = layer_norm(x, Tensor(np.ones(8)), Tensor(np.zeros(8)))
        np.testing.assert_allclose(out.data.mean(axis=-1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.data.std(axis=-1), 1.0, atol=1e-5)

    def test_gradient(self, rng):
        x = Tensor(rng.standard_normal((3, 6)), requires_grad=True)
        g = Tensor(rng.standard_normal(6), requires_grad=True)
        b = Tensor(rng.standard_normal(6), requires_grad=True)
        errs = check_gradients(lambda a, c, d: tsum(sigmoid(layer_norm(a, c, d))),
                               [x, g, b], h=1e-5)
        assert max(errs) <= 1e-4


class TestCheckGradientsItself:
    def test_linear_function_is_exact(self):
        x = Tensor(np.arange(1.0, 5.0), requires_grad=True)
        errs = check_gradients(lambda a: tsum(a), [x], h=1e-5)
        assert max(errs) <= 1e-10
        np.testing.assert_array_equal(x.grad, np.ones(4))

    def test_quadratic(self):
        x = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
        errs = check_gradients(lambda a: tsum(a * a), [x], h=1e-5)
        assert max(errs) <= 1e-8
        np.testing.assert_allclose(x.grad, [2.0, 4.0, 6.0])

    def test_nonfinite_forward_raises_probe_error(self):
        from pointdet.autodiff import log
        x = Tensor(np.array([1e-9]), requires_grad=True)  # probe crosses zero -> log(neg) = nan
        with pytest.raises(ProbeError):
            check_gradients(lambda a: tsum(log(a)), [x], h=1e-5)
