"""Proximal maps, smooth quadratic terms and the Moreau-identity bridge.

All ``prox_*`` helpers take the *effective* threshold ``theta`` (step times
weight). ``ProxFn.prox(a, step)`` folds its own weight into ``theta``.
"""
import numpy as np

from fairpd import kernels
from fairpd.errors import DimensionError, ParameterError
from fairpd.linops import Identity, Mask


def _check_theta(theta):
    if theta < 0:
        raise ParameterError(f"threshold must be nonnegative, got {theta}")


def prox_l1(a, theta):
    """Soft thresholding ``sign(a) * max(|a| - theta, 0)``."""
    _check_theta(theta)
    return kernels.soft_threshold(a, theta)


def prox_l21(a, theta):
    """Group shrinkage of per-pixel 2-vectors stacked along axis 0."""
    _check_theta(theta)
    if a.shape[0] != 2:
        raise DimensionError("gradient field must have leading axis of size 2")
    return kernels.prox_l21(a, theta)


def project_ball21(y, lam):
    """Project every per-pixel 2-vector onto the Euclidean ball of radius ``lam``."""
    _check_theta(lam)
    if y.shape[0] != 2:
        raise DimensionError("gradient field must have leading axis of size 2")
    return kernels.project_ball21(y, lam)


def prox_nuclear(X, theta):
    """Singular value soft-thresholding from a full SVD."""
    _check_theta(theta)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError("nuclear-norm prox needs a 2-D array")
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    s = np.maximum(s - theta, 0.0)
    return (U * s) @ Vt


def project_box(a, lower, upper):
    if lower > upper:
        raise ParameterError(f"empty box: lower={lower} > upper={upper}")
    return np.clip(a, lower, upper)


def project_nonneg(a):
    return np.maximum(a, 0.0)


class ProxFn:
    """A closed convex function with a cheap proximal map.

    ``value`` returns ``inf`` outside the domain of indicator kinds;
    ``penalty`` is the same but drops indicator terms (used for reported
    objective values where iterates approach feasibility asymptotically).
    Separable kinds expose ``interval`` = (lower, upper) bounds so the
    certificates can evaluate conjugates in closed form.
    """

    kind = "abstract"
    weight = 0.0
    separable = False
    interval = None

    def prox(self, a, step):
        raise NotImplementedError

    def value(self, x):
        raise NotImplementedError

    def penalty(self, x):
        return self.value(x)

    def to_dict(self):
        return {"kind": self.kind}

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


class ZeroFn(ProxFn):
    kind = "zero"
    separable = True
    interval = (-np.inf, np.inf)

    def prox(self, a, step):
        return np.array(a, dtype=np.float64, copy=True)

    def value(self, x):
        return 0.0


class L1Norm(ProxFn):
    kind = "l1"
    separable = True

    def __init__(self, weight):
        if weight < 0:
            raise ParameterError("l1 weight must be nonnegative")
        self.weight = float(weight)

    def prox(self, a, step):
        return prox_l1(a, step * self.weight)

    def value(self, x):
        return self.weight * float(np.abs(x).sum())

    def to_dict(self):
        return {"kind": self.kind, "weight": self.weight}


class L21Norm(ProxFn):
    """Isotropic group norm; ``value(grad2d(x))`` is the TV of ``x``."""

    kind = "l21"

    def __init__(self, weight):
        if weight < 0:
            raise ParameterError("l21 weight must be nonnegative")
        self.weight = float(weight)

    def prox(self, a, step):
        return prox_l21(a, step * self.weight)

    def value(self, p):
        return self.weight * float(np.sqrt(p[0] ** 2 + p[1] ** 2).sum())

    def to_dict(self):
        return {"kind": self.kind, "weight": self.weight}


class NuclearNorm(ProxFn):
    kind = "nuclear"

    def __init__(self, weight):
        if weight < 0:
            raise ParameterError("nuclear weight must be nonnegative")
        self.weight = float(weight)

    def prox(self, a, step):
        return prox_nuclear(a, step * self.weight)

    def value(self, X):
        return self.weight * float(np.linalg.svd(X, compute_uv=False).sum())

    def to_dict(self):
        return {"kind": self.kind, "weight": self.weight}


class BoxIndicator(ProxFn):
    kind = "box"
    separable = True

    def __init__(self, lower, upper):
        if lower > upper:
            raise ParameterError(f"empty box: lower={lower} > upper={upper}")
        self.lower = float(lower)
        self.upper = float(upper)
        self.interval = (self.lower, self.upper)

    def prox(self, a, step):
        return project_box(a, self.lower, self.upper)

    def value(self, x):
        inside = np.all(x >= self.lower) and np.all(x <= self.upper)
        return 0.0 if inside else np.inf

    def penalty(self, x):
        return 0.0

    def to_dict(self):
        return {"kind": self.kind, "lower": self.lower, "upper": self.upper}


class NonNegIndicator(ProxFn):
    kind = "nonneg"
    separable = True
    interval = (0.0, np.inf)

    def prox(self, a, step):
        return project_nonneg(a)

    def value(self, x):
        return 0.0 if np.all(x >= 0) else np.inf

    def penalty(self, x):
        return 0.0


def prox_fn_from_dict(spec):
    kind = spec["kind"]
    if kind == "zero":
        return ZeroFn()
    if kind == "l1":
        return L1Norm(spec["weight"])
    if kind == "l21":
        return L21Norm(spec["weight"])
    if kind == "nuclear":
        return NuclearNorm(spec["weight"])
    if kind == "box":
        return BoxIndicator(spec["lower"], spec["upper"])
    if kind == "nonneg":
        return NonNegIndicator()
    raise ParameterError(f"unknown prox function kind {kind!r}")


def prox_conjugate(base, a, sigma):
    """Prox of ``sigma * base^*`` evaluated through the Moreau identity.

    ``a - sigma * prox_{base/sigma}(a / sigma)``.
    """
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    return a - sigma * base.prox(a / sigma, 1.0 / sigma)


class QuadraticFn:
    """``(weight / 2) * ||A x - b||^2``; weight 0 gives the zero function.

    ``lipschitz`` is ``weight * ||A||^2`` with the operator norm taken from
    power iteration (cached on the operator), unless ``op_norm_sq`` is
    supplied explicitly.
    """

    kind = "quadratic"
    _MEMO_SLOTS = 3

    def __init__(self, op, offset, weight=1.0, op_norm_sq=None, _memo=None):
        if weight < 0:
            raise ParameterError("weight must be nonnegative")
        offset = np.asarray(offset, dtype=np.float64)
        if offset.shape != op.out_shape:
            raise DimensionError(
                f"offset shape {offset.shape} does not match operator output {op.out_shape}"
            )
        self.op = op
        self.offset = offset
        self.weight = float(weight)
        self._op_norm_sq = op_norm_sq
        # recent [x, Ax - b, A^T(Ax - b)] entries, shared by rescaled copies; keyed on identity
        # since solvers never mutate iterates in place
        self._memo = [] if _memo is None else _memo

    @property
    def shape(self):
        return self.op.in_shape

    @property
    def op_norm_sq(self):
        if self._op_norm_sq is None:
            self._op_norm_sq = self.op.norm_sq()
        return self._op_norm_sq

    def lipschitz(self):
        if self.weight == 0.0:
            return 0.0
        return self.weight * self.op_norm_sq

    def scaled(self, factor):
        """Same data term with weight multiplied by ``factor``."""
        return QuadraticFn(
            self.op, self.offset, self.weight * factor, self._op_norm_sq, self._memo
        )

    def _entry(self, x):
        for entry in self._memo:
            if entry[0] is x:
                return entry
        entry = [x, self.op.apply(x) - self.offset, None]
        self._memo.insert(0, entry)
        del self._memo[self._MEMO_SLOTS :]
        return entry

    def residual(self, x):
        return self._entry(x)[1]

    def value(self, x):
        if self.weight == 0.0:
            return 0.0
        r = self.residual(x)
        return 0.5 * self.weight * float(np.vdot(r, r))

    def grad(self, x):
        if self.weight == 0.0:
            return np.zeros(self.shape)
        entry = self._entry(x)
        if entry[2] is None:
            entry[2] = self.op.adjoint(entry[1])
        return self.weight * entry[2]

    @property
    def is_diagonal(self):
        return isinstance(self.op, (Identity, Mask))

    def diagonal(self):
        """Per-entry multipliers when the operator is diagonal."""
        if isinstance(self.op, Identity):
            return np.ones(self.shape)
        if isinstance(self.op, Mask):
            return self.op.weights
        raise ParameterError("operator is not diagonal")


def smooth_eval_grad(f, x):
    """Return ``(value, gradient)`` of a smooth term."""
    return f.value(x), f.grad(x)


def zero_smooth(shape):
    return QuadraticFn(Identity(shape), np.zeros(shape), 0.0)
