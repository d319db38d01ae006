# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-pixel kernels: gradient, divergence and group shrinkage."""
import numpy as np
cimport numpy as cnp
from libc.math cimport copysign, fabs, fmin, sqrt

cnp.import_array()


def grad2d(const double[:, ::1] x):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1], i, j
    out = np.zeros((2, m, n))
    cdef double[:, :, ::1] o = out
    for i in range(m):
        for j in range(n):
            if i + 1 < m:
                o[0, i, j] = x[i + 1, j] - x[i, j]
            if j + 1 < n:
                o[1, i, j] = x[i, j + 1] - x[i, j]
    return out


def grad2d_adjoint(const double[:, :, ::1] p):
    cdef Py_ssize_t m = p.shape[1], n = p.shape[2], i, j
    out = np.zeros((m, n))
    cdef double[:, ::1] o = out
    cdef double acc
    for i in range(m):
        for j in range(n):
            acc = 0.0
            if i + 1 < m:
                acc -= p[0, i, j]
            if i > 0:
                acc += p[0, i - 1, j]
            if j + 1 < n:
                acc -= p[1, i, j]
            if j > 0:
                acc += p[1, i, j - 1]
            o[i, j] = acc
    return out


def soft_threshold(a, double theta):
    arr = np.ascontiguousarray(a, dtype=np.float64)
    flat_in = arr.reshape(-1)
    out = np.empty_like(flat_in)
    cdef const double[::1] src = flat_in
    cdef double[::1] dst = out
    cdef Py_ssize_t k, size = src.shape[0]
    cdef double v
    # branchless so the loop vectorizes; NaN propagates like the numpy path
    for k in range(size):
        v = src[k]
        dst[k] = v - copysign(fmin(fabs(v), theta), v)
    return out.reshape(arr.shape)


def prox_l21(const double[:, :, ::1] p, double theta):
    cdef Py_ssize_t m = p.shape[1], n = p.shape[2], i, j
    out = np.zeros((2, m, n))
    cdef double[:, :, ::1] o = out
    cdef double nrm, s
    for i in range(m):
        for j in range(n):
            nrm = sqrt(p[0, i, j] * p[0, i, j] + p[1, i, j] * p[1, i, j])
            if nrm > theta:
                s = 1.0 - theta / nrm
                o[0, i, j] = p[0, i, j] * s
                o[1, i, j] = p[1, i, j] * s
    return out


def project_ball21(const double[:, :, ::1] p, double lam):
    cdef Py_ssize_t m = p.shape[1], n = p.shape[2], i, j
    out = np.zeros((2, m, n))
    if lam == 0.0:
        return out
    cdef double[:, :, ::1] o = out
    cdef double nrm, s
    for i in range(m):
        for j in range(n):
            nrm = sqrt(p[0, i, j] * p[0, i, j] + p[1, i, j] * p[1, i, j])
            s = 1.0
            if nrm > lam:
                s = lam / nrm
            o[0, i, j] = p[0, i, j] * s
            o[1, i, j] = p[1, i, j] * s
    return out
