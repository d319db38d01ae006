"""Pure numpy versions of the per-pixel kernels.

These are the reference implementations; the Cython module ``_ckernels``
must agree with them to rounding error.
"""
import numpy as np


def grad2d(x):
    out = np.zeros((2,) + x.shape)
    out[0, :-1, :] = x[1:, :] - x[:-1, :]
    out[1, :, :-1] = x[:, 1:] - x[:, :-1]
    return out


def grad2d_adjoint(p):
    # negative divergence, consistent with zero difference at the last row/column
    pv, ph = p[0], p[1]
    out = np.zeros(pv.shape)
    out[:-1, :] -= pv[:-1, :]
    out[1:, :] += pv[:-1, :]
    out[:, :-1] -= ph[:, :-1]
    out[:, 1:] += ph[:, :-1]
    return out


def soft_threshold(a, theta):
    return np.sign(a) * np.maximum(np.abs(a) - theta, 0.0)


def group_norms(p):
    return np.sqrt(p[0] ** 2 + p[1] ** 2)


def prox_l21(p, theta):
    nrm = group_norms(p)
    scale = np.zeros_like(nrm)
    nz = nrm > theta
    scale[nz] = 1.0 - theta / nrm[nz]
    return p * scale


def project_ball21(p, lam):
    nrm = group_norms(p)
    if lam == 0.0:
        return np.zeros_like(p)
    return p / np.maximum(1.0, nrm / lam)
