"""Linear operators with forward/adjoint pairs and spectral-norm estimation.

Arrays ("grids") are plain float64 numpy arrays. Every operator declares the
shape it accepts and the shape it returns and checks both directions.
"""
import math

import numpy as np

from fairpd import kernels
from fairpd.errors import DimensionError, ParameterError


class LinOp:
    """Base class: subclasses implement ``_apply`` and ``_adjoint``."""

    kind = "abstract"

    def __init__(self, in_shape, out_shape):
        self.in_shape = tuple(int(s) for s in in_shape)
        self.out_shape = tuple(int(s) for s in out_shape)
        self._norm_sq = None

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.in_shape:
            raise DimensionError(
                f"{self.kind}: expected input shape {self.in_shape}, got {x.shape}"
            )
        return self._apply(x)

    def adjoint(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != self.out_shape:
            raise DimensionError(
                f"{self.kind}: expected adjoint input shape {self.out_shape}, got {y.shape}"
            )
        return self._adjoint(y)

    __call__ = apply

    def norm_sq(self, max_iters=1000, tol=1e-8):
        """Cached power-iteration estimate of ``||op||^2``."""
        if self._norm_sq is None:
            self._norm_sq = norm_sq_estimate(self, max_iters=max_iters, tol=tol)
        return self._norm_sq

    def to_dense(self):
        """Assemble the matrix acting on flattened (row-major) inputs.

        Only intended for small operators used by oracles in tests.
        """
        n_in = int(np.prod(self.in_shape))
        cols = []
        for j in range(n_in):
            e = np.zeros(n_in)
            e[j] = 1.0
            cols.append(self.apply(e.reshape(self.in_shape)).ravel())
        return np.stack(cols, axis=1)

    def __repr__(self):
        return f"{type(self).__name__}({self.in_shape} -> {self.out_shape})"


class Identity(LinOp):
    kind = "identity"

    def __init__(self, shape):
        super().__init__(shape, shape)
        self._norm_sq = 1.0

    def _apply(self, x):
        return x.copy()

    def _adjoint(self, y):
        return y.copy()


class Dense(LinOp):
    """Explicit matrix acting on 1-D vectors."""

    kind = "dense"

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise DimensionError("dense operator needs a 2-D matrix")
        super().__init__((matrix.shape[1],), (matrix.shape[0],))
        self.matrix = matrix

    def _apply(self, x):
        return self.matrix @ x

    def _adjoint(self, y):
        return self.matrix.T @ y


class Mask(LinOp):
    """Diagonal operator: pointwise multiplication by ``weights``.

    A 0/1 mask gives the inpainting operator; the operator is self-adjoint.
    """

    kind = "mask"

    def __init__(self, weights):
        weights = np.asarray(weights, dtype=np.float64)
        super().__init__(weights.shape, weights.shape)
        self.weights = weights
        self._norm_sq = float(np.max(weights**2)) if weights.size else 0.0

    def _apply(self, x):
        return self.weights * x

    def _adjoint(self, y):
        return self.weights * y


class Grad2D(LinOp):
    """Forward differences stacked as (vertical, horizontal).

    The difference at the last row (vertical) and last column (horizontal)
    is zero.
    """

    kind = "grad2d"

    def __init__(self, shape):
        if len(shape) != 2:
            raise DimensionError("grad2d acts on 2-D images")
        super().__init__(shape, (2,) + tuple(shape))

    def _apply(self, x):
        return kernels.grad2d(x)

    def _adjoint(self, y):
        return kernels.grad2d_adjoint(y)


def gaussian_kernel(sigma):
    """Normalized 1-D Gaussian taps truncated at 3 sigma."""
    if sigma < 0:
        raise ParameterError("blur sigma must be nonnegative")
    radius = int(math.ceil(3.0 * sigma))
    if radius == 0:
        return np.ones(1)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def _reflect_conv_matrix(n, taps):
    """n x n matrix of 1-D convolution with symmetric (edge-repeating) padding."""
    r = (len(taps) - 1) // 2
    src = np.pad(np.arange(n), r, mode="symmetric")
    mat = np.zeros((n, n))
    for i in range(n):
        # taps are symmetric, so convolution and correlation coincide
        np.add.at(mat[i], src[i : i + 2 * r + 1], taps)
    return mat


class GaussianBlur(LinOp):
    """Separable Gaussian blur with symmetric boundary padding.

    Applied as ``B_r @ X @ B_c.T`` with the 1-D banded matrices, so the
    adjoint is exact (``B_r.T @ Y @ B_c``) including the boundary folding.
    """

    kind = "blur"

    def __init__(self, shape, sigma):
        if len(shape) != 2:
            raise DimensionError("blur acts on 2-D images")
        super().__init__(shape, shape)
        self.sigma = float(sigma)
        taps = gaussian_kernel(self.sigma)
        if len(taps) - 1 > 2 * min(shape):
            raise ParameterError("blur kernel is wider than the image")
        self._rows = _reflect_conv_matrix(shape[0], taps)
        self._cols = _reflect_conv_matrix(shape[1], taps)

    def _apply(self, x):
        return self._rows @ x @ self._cols.T

    def _adjoint(self, y):
        return self._rows.T @ y @ self._cols


class Downsample(LinOp):
    """Keep every ``factor``-th pixel per axis; adjoint inserts zeros."""

    kind = "downsample"

    def __init__(self, shape, factor):
        factor = int(factor)
        if factor < 1:
            raise ParameterError("downsampling factor must be >= 1")
        out = tuple(-(-s // factor) for s in shape)
        super().__init__(shape, out)
        self.factor = factor
        self._norm_sq = 1.0

    def _apply(self, x):
        k = self.factor
        return x[(slice(None, None, k),) * x.ndim].copy()

    def _adjoint(self, y):
        k = self.factor
        out = np.zeros(self.in_shape)
        out[(slice(None, None, k),) * out.ndim] = y
        return out


class Compose(LinOp):
    """``outer(inner(x))``."""

    kind = "compose"

    def __init__(self, outer, inner):
        if outer.in_shape != inner.out_shape:
            raise DimensionError(
                f"cannot compose {outer!r} after {inner!r}: shape mismatch"
            )
        super().__init__(inner.in_shape, outer.out_shape)
        self.outer = outer
        self.inner = inner

    def _apply(self, x):
        return self.outer.apply(self.inner.apply(x))

    def _adjoint(self, y):
        return self.inner.adjoint(self.outer.adjoint(y))


def norm_sq_estimate(op, max_iters=1000, tol=1e-8):
    """Estimate ``||op||^2`` by power iteration on ``op^T op``.

    Starts from the normalized all-ones vector. If the iterate collapses
    (norm below 1e-14, e.g. the constant image under a gradient), restarts
    once from a seeded random vector. Stops when the Rayleigh quotient
    changes by less than ``tol`` relatively, or after ``max_iters``.
    Returns 0.0 for the zero operator.
    """
    if max_iters < 1:
        raise ParameterError("max_iters must be >= 1")
    if tol <= 0:
        raise ParameterError("tol must be positive")
    v = np.ones(op.in_shape)
    v /= np.linalg.norm(v)
    restarted = False
    est = 0.0
    for _ in range(max_iters):
        w = op.adjoint(op.apply(v))
        nrm = np.linalg.norm(w)
        if nrm < 1e-14:
            if restarted:
                return 0.0
            restarted = True
            v = np.random.default_rng(0).standard_normal(op.in_shape)
            v /= np.linalg.norm(v)
            continue
        new = float(np.vdot(v, w))
        v = w / nrm
        if est > 0 and abs(new - est) <= tol * abs(new):
            return new
        est = new
    return est
