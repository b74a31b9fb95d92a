import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discseg import tensor


class TestConstructors:
    def test_zeros(self):
        t = tensor.zeros([2, 2])
        assert t.shape == (2, 2)
        assert np.array_equal(t, [[0, 0], [0, 0]])
        assert t.dtype == np.float32

    def test_full_scalar(self):
        assert np.array_equal(tensor.full([1], 3.5), [3.5])

    def test_ones_sum(self):
        assert tensor.tensor_sum(tensor.ones([2, 1, 1, 1])) == 2.0

    @pytest.mark.parametrize("shape", [[], [0], [2, 0], [-1], [3, -2]])
    def test_bad_shapes_rejected(self, shape):
        with pytest.raises(tensor.ShapeError):
            tensor.zeros(shape)


class TestGaussianInit:
    def test_deterministic_for_seed(self):
        a = tensor.gaussian_init([32, 32], 0.0, 0.05, seed=9)
        b = tensor.gaussian_init([32, 32], 0.0, 0.05, seed=9)
        assert a.tobytes() == b.tobytes()
        c = tensor.gaussian_init([32, 32], 0.0, 0.05, seed=10)
        assert a.tobytes() != c.tobytes()

    def test_sample_stddev(self):
        # statistical oracle: n=1e6 draws pin the sample stddev tightly
        t = tensor.gaussian_init([1000, 1000], 0.0, 0.05, seed=3)
        assert 0.049 <= float(t.std()) <= 0.051

    def test_sample_mean(self):
        t = tensor.gaussian_init([1000, 1000], 0.0, 0.05, seed=4)
        assert abs(float(t.mean())) < 0.001

    def test_mean_shift(self):
        t = tensor.gaussian_init([100, 100], 2.0, 0.05, seed=5)
        # 5 sigma/sqrt(n) band around the requested mean
        assert abs(float(t.mean()) - 2.0) < 5 * 0.05 / 100

    def test_bad_stddev(self):
        with pytest.raises(tensor.ParameterError):
            tensor.gaussian_init([2], 0.0, 0.0, seed=0)


class TestElementwise:
    def test_add(self):
        out = tensor.add(tensor.as_tensor([1, 2]), tensor.as_tensor([3, 4]))
        assert np.array_equal(out, [4, 6])

    def test_shape_mismatch(self):
        with pytest.raises(tensor.ShapeError):
            tensor.add(tensor.zeros([2]), tensor.zeros([3]))

    def test_clip(self):
        out = tensor.clip(tensor.as_tensor([-1, 0.5, 2]), 0, 1)
        assert np.array_equal(out, [0, 0.5, 1])

    def test_clip_idempotent_bitwise(self):
        t = tensor.gaussian_init([64], 0.0, 2.0, seed=1)
        once = tensor.clip(t, -0.5, 0.5)
        twice = tensor.clip(once, -0.5, 0.5)
        assert once.tobytes() == twice.tobytes()

    def test_mean_of_ones(self):
        assert tensor.tensor_mean(tensor.ones([4])) == 1.0

    def test_map(self):
        out = tensor.tensor_map(tensor.as_tensor([1.0, 2.0]), lambda v: v * v)
        assert np.allclose(out, [1.0, 4.0])

    def test_ops_produce_finite(self):
        a = tensor.gaussian_init([128], 0.0, 100.0, seed=2)
        b = tensor.gaussian_init([128], 0.0, 100.0, seed=3)
        for op in (tensor.add, tensor.sub, tensor.mul):
            assert np.all(np.isfinite(op(a, b)))


finite_arrays = st.lists(
    st.floats(min_value=-1e3, max_value=1e3, width=32), min_size=1, max_size=32)


class TestAlgebraProperties:
    @given(finite_arrays, finite_arrays)
    @settings(max_examples=50)
    def test_add_mul_commute(self, xs, ys):
        n = min(len(xs), len(ys))
        a, b = tensor.as_tensor(xs[:n]), tensor.as_tensor(ys[:n])
        assert np.allclose(tensor.add(a, b), tensor.add(b, a), atol=1e-6)
        assert np.allclose(tensor.mul(a, b), tensor.mul(b, a), atol=1e-6)

    @given(finite_arrays, finite_arrays, finite_arrays)
    @settings(max_examples=50)
    def test_add_mul_associative(self, xs, ys, zs):
        n = min(len(xs), len(ys), len(zs))
        if n == 0:
            return
        a = tensor.as_tensor(xs[:n])
        b = tensor.as_tensor(ys[:n])
        c = tensor.as_tensor(zs[:n])
        assert np.allclose(tensor.add(tensor.add(a, b), c),
                           tensor.add(a, tensor.add(b, c)), atol=1e-6, rtol=1e-6)
        assert np.allclose(tensor.mul(tensor.mul(a, b), c),
                           tensor.mul(a, tensor.mul(b, c)), atol=1e-6, rtol=1e-5)

    @given(finite_arrays, st.floats(min_value=-50, max_value=50))
    @settings(max_examples=50)
    def test_sum_scale_linear(self, xs, alpha):
        t = tensor.as_tensor(xs)
        lhs = tensor.tensor_sum(tensor.scale(t, alpha))
        rhs = alpha * tensor.tensor_sum(t)
        assert lhs == pytest.approx(rhs, rel=1e-5, abs=1e-3)
