"""Backend selection for the per-pixel kernels.

The compiled module is used when it was built; otherwise the numpy fallback
is used. Set ``FAIRPD_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from fairpd import _kernels_py

_FORCE_PY = os.environ.get("FAIRPD_PURE_PYTHON", "") not in ("", "0")

try:
    if _FORCE_PY:
        raise ImportError
    from fairpd import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"


def _c3(p):
    return np.ascontiguousarray(p, dtype=np.float64)


def grad2d(x):
    return _impl.grad2d(_c3(x))


def grad2d_adjoint(p):
    return _impl.grad2d_adjoint(_c3(p))


def soft_threshold(a, theta):
    return _impl.soft_threshold(np.asarray(a, dtype=np.float64), float(theta))


def prox_l21(p, theta):
    return _impl.prox_l21(_c3(p), float(theta))


def project_ball21(p, lam):
    return _impl.project_ball21(_c3(p), float(lam))
