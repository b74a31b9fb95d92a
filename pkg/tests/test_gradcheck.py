import numpy as np

from discseg import gradcheck


def test_suite_passes_with_small_sample():
    results, ok = gradcheck.run_suite(seed=0, instances=5)
    assert ok
    assert set(results) >= {"bce", "jaccard", "combined", "conv", "pool",
                            "upsample", "sigmoid"}
    assert all(err < gradcheck.DEFAULT_TOLERANCE for err in results.values())


def test_corrupted_gradient_detected():
    results, ok = gradcheck.run_suite(seed=0, instances=3, corrupt="conv")
    assert not ok
    assert results["conv"] > gradcheck.DEFAULT_TOLERANCE


def test_deterministic_for_seed():
    a, _ = gradcheck.run_suite(seed=4, instances=3)
    b, _ = gradcheck.run_suite(seed=4, instances=3)
    assert a == b


def test_fd_gradient_on_quadratic():
    x = np.array([1.0, -2.0, 0.5])
    grad = gradcheck.fd_gradient(lambda v: float(np.sum(v ** 2)), x.copy(), 1e-5)
    assert np.allclose(grad, 2 * x, atol=1e-8)


def test_relative_error_floor():
    a = np.array([0.0])
    b = np.array([1e-9])
    assert gradcheck.relative_error(a, b) < 1e-4
