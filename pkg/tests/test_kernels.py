"""The compiled and numpy kernels must agree."""
import numpy as np
import pytest

from fairpd import _kernels_py, kernels

try:
    from fairpd import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")


@needs_ext
@pytest.mark.parametrize("shape", [(1, 1), (3, 7), (16, 16)])
def test_grad_pair_agree(shape, rng):
    x = rng.standard_normal(shape)
    p = rng.standard_normal((2,) + shape)
    np.testing.assert_allclose(_ckernels.grad2d(x), _kernels_py.grad2d(x), atol=1e-14)
    np.testing.assert_allclose(
        _ckernels.grad2d_adjoint(p), _kernels_py.grad2d_adjoint(p), atol=1e-14
    )


@needs_ext
@pytest.mark.parametrize("theta", [0.0, 0.3, 5.0])
def test_shrinkage_agree(theta, rng):
    p = rng.standard_normal((2, 9, 6))
    a = rng.standard_normal(40)
    np.testing.assert_allclose(_ckernels.prox_l21(p, theta), _kernels_py.prox_l21(p, theta))
    np.testing.assert_allclose(
        _ckernels.project_ball21(p, theta), _kernels_py.project_ball21(p, theta)
    )
    np.testing.assert_allclose(
        _ckernels.soft_threshold(a, theta), _kernels_py.soft_threshold(a, theta)
    )


def test_soft_threshold_any_shape(rng):
    a = rng.standard_normal((3, 4, 5))
    out = kernels.soft_threshold(a, 0.5)
    assert out.shape == a.shape
    np.testing.assert_allclose(out, np.sign(a) * np.maximum(np.abs(a) - 0.5, 0))


def test_group_norms(rng):
    p = rng.standard_normal((2, 4, 4))
    np.testing.assert_allclose(_kernels_py.group_norms(p), np.hypot(p[0], p[1]))
