"""Numerical convergence certificates for the fair primal-dual methods.

The fair saddle function is ``f1(x) + h(x) + <x, y> - phi^*(y)`` with
``phi = g o K + f2``. With ``Psi(x, y) = f1(x) + h(x) + phi^*(y)`` and the
skew map ``F(x, y) = (y, -x)`` every variant satisfies, per iteration and
for every comparison point ``v``::

    Psi(u+) - Psi(v) - <v - u+, F(u+)>
        <= d(v; v_k) - d(v; v_k+1) - dtilde(v_k+1; v_k) [+ inexact term]

where ``u+ = (x_hat, y_next)`` and ``v_k = (x_k, y_k)``. This module
evaluates every piece of that inequality, the distance functions ``d`` and
``dtilde`` per variant, and the ergodic primal-dual gap.

Evaluating ``Psi`` needs ``phi^*`` in closed form, which restricts the
certificates to ``K = I`` with ``g`` a separable interval indicator (or zero)
and ``f2`` a diagonal quadratic.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from fairpd.errors import CapabilityError, ConfigurationError
from fairpd.linops import Identity
from fairpd.solvers import VARIANTS, PrimalDual, check_stepsizes, exact_dual_supported

# slack on inequality residuals, scaled by the magnitude of the terms involved
RESIDUAL_TOL = 1e-8


@dataclass
class PrimalDualPoint:
    """A point ``v = (x, y)``; ``grad`` optionally caches ``grad f1(x)``."""

    x: np.ndarray
    y: np.ndarray
    grad: np.ndarray = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.shape != self.y.shape:
            raise ConfigurationError("fair points need x and y of the same shape")

    def with_grad(self, f1):
        if self.grad is None:
            self.grad = f1.grad(self.x)
        return self


@dataclass
class Metric:
    """Variant-specific distance functions built from ``(sigma, tau, L_f1)``."""

    variant: str
    sigma: float
    tau: float
    L_f1: float

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}")

    def check(self):
        """Raise unless the fair step-size conditions hold."""
        check_stepsizes(self.variant, True, self.sigma, self.tau, self.L_f1, self.L_f1, 1.0)
        return self

    def Q(self, n):
        """Dense matrix of ``d`` for CV/PDFP/AFBA on ``n``-dim blocks."""
        s, t = self.sigma, self.tau
        eye = np.eye(n)
        off = -eye if self.variant == "CV" else np.zeros((n, n))
        if self.variant == "PD3O":
            raise CapabilityError("PD3O distance is not a fixed quadratic form")
        return np.block([[eye / s, off], [off, eye / t]])

    def M(self, n):
        """Dense matrix of ``dtilde`` for CV/PDFP/AFBA."""
        s, t, L = self.sigma, self.tau, self.L_f1
        eye = np.eye(n)
        if self.variant == "CV":
            return self.Q(n) - np.block([[L * eye, 0 * eye], [0 * eye, 0 * eye]])
        if self.variant == "PD3O":
            raise CapabilityError("PD3O distance is not a fixed quadratic form")
        return np.block([[(1 / s - L) * eye, 0 * eye], [0 * eye, (1 / t - s) * eye]])


def _dot(a, b):
    return float(np.vdot(a, b))


def _cv_form(sigma, tau, dx, dy):
    return 0.5 * (_dot(dx, dx) / sigma - 2.0 * _dot(dx, dy) + _dot(dy, dy) / tau)


def _pd3o_bar(sigma, tau, dx, dy, dg):
    return (
        0.5 * _dot(dx, dx) / sigma
        + 0.5 * _dot(dy, dy) / tau
        + 0.5 * sigma * _dot(dg, dg)
        - _dot(dy, dx - sigma * dg)
        - _dot(dx, dg)
    )


def d_value(metric, v, v_ref):
    """``d(v; v_ref)``.

    CV: ``1/2 ||v - v_ref||_Q^2`` with ``Q = [[I/sigma, -I], [-I, I/tau]]``;
    PDFP/AFBA: ``Q = diag(I/sigma, I/tau)``; PD3O: the completed-square form
    with gradient difference ``grad f1(x_v) - grad f1(x_ref)`` (both points
    must carry ``grad``).
    """
    dx = v.x - v_ref.x
    dy = v.y - v_ref.y
    s, t = metric.sigma, metric.tau
    if metric.variant == "CV":
        return _cv_form(s, t, dx, dy)
    if metric.variant in ("PDFP", "AFBA"):
        return 0.5 * (_dot(dx, dx) / s + _dot(dy, dy) / t)
    if v.grad is None or v_ref.grad is None:
        raise ConfigurationError("PD3O distance needs cached gradients on both points")
    return _pd3o_bar(s, t, dx, dy, v.grad - v_ref.grad)


def dtilde_value(metric, v_next, v_prev, grad_ref=None):
    """``dtilde(v_next; v_prev)``.

    CV: ``1/2 ||.||_M^2`` with ``M = Q - diag(L_f1 I, 0)``; PDFP/AFBA:
    ``M = diag((1/sigma - L_f1) I, (1/tau - sigma) I)``. For PD3O the
    value depends on the comparison point through ``grad_ref`` (its
    ``grad f1``)::

        dbar(dx, dy, grad_ref - grad_prev)
            + (1/(2 L_f1) - sigma/2) ||grad_ref - grad_next||^2
    """
    dx = v_next.x - v_prev.x
    dy = v_next.y - v_prev.y
    s, t, L = metric.sigma, metric.tau, metric.L_f1
    if metric.variant == "CV":
        return _cv_form(s, t, dx, dy) - 0.5 * L * _dot(dx, dx)
    if metric.variant in ("PDFP", "AFBA"):
        return 0.5 * ((1.0 / s - L) * _dot(dx, dx) + (1.0 / t - s) * _dot(dy, dy))
    if grad_ref is None or v_next.grad is None or v_prev.grad is None:
        raise ConfigurationError("PD3O dtilde needs grad_ref and cached gradients")
    gap = grad_ref - v_next.grad
    extra = 0.0 if L == 0 else (0.5 / L - 0.5 * s) * _dot(gap, gap)
    return _pd3o_bar(s, t, dx, dy, grad_ref - v_prev.grad) + extra


def lemma3_sides(a, b, c, d, S):
    """Both sides of ``2<a-b, S(c-d)> = (|a-d|_S^2 - |a-c|_S^2) + (|b-c|_S^2 - |b-d|_S^2)``."""

    def sq(u):
        return float(u @ S @ u)

    lhs = 2.0 * float((a - b) @ S @ (c - d))
    rhs = (sq(a - d) - sq(a - c)) + (sq(b - c) - sq(b - d))
    return lhs, rhs


# ------------------------------------------------------------ conjugates


def certifiable(prob, delta):
    f2 = prob.f.scaled(1.0 - delta)
    return exact_dual_supported(prob.g, f2, prob.K) and prob.h.separable


def _require_certifiable(prob, delta):
    if not isinstance(prob.K, Identity) or not certifiable(prob, delta):
        raise CapabilityError(
            "certificates need K = I, a separable interval g and a diagonal quadratic f"
        )


def phi_conjugate(prob, delta, y):
    """``(g + f2)^*(y)`` for an interval indicator ``g`` and diagonal ``f2``.

    Per coordinate ``sup_{z in [l, u]} z y - c/2 (m z - b)^2``; with
    ``c m^2 > 0`` the maximizer is the clipped stationary point, otherwise
    the problem is linear and the supremum sits on a bound (``inf`` when
    that bound is infinite).
    """
    _require_certifiable(prob, delta)
    f2 = prob.f.scaled(1.0 - delta)
    c = f2.weight
    m = f2.diagonal() * np.ones_like(y) if c > 0 else np.zeros_like(y)
    b = f2.offset if c > 0 else np.zeros_like(y)
    lo, hi = prob.g.interval if prob.g.kind != "zero" else (-np.inf, np.inf)
    curv = c * m * m
    flat = curv <= 0
    safe = np.where(flat, 1.0, curv)
    z = np.clip((y + c * m * b) / safe, lo, hi)
    if np.any(flat):
        # linear pieces (m = 0): the supremum of z y sits on a bound
        z_flat = np.where(y > 0, hi, np.where(y < 0, lo, np.clip(0.0, lo, hi)))
        if not np.all(np.isfinite(z_flat[flat])):
            return math.inf
        z = np.where(flat, z_flat, z)
    vals = z * y - 0.5 * c * (m * z - b) ** 2
    return float(vals.sum())


def psi(prob, delta, u):
    """``f1(x) + h(x) + phi^*(y)``."""
    f1 = prob.f.scaled(delta)
    return f1.value(u.x) + prob.h.value(u.x) + phi_conjugate(prob, delta, u.y)


def skew_pairing(v, u):
    """``<v - u, F(u)>`` with ``F(x, y) = (y, -x)``."""
    return _dot(v.x - u.x, u.y) - _dot(v.y - u.y, u.x)


# ---------------------------------------------------------- inequalities


@dataclass
class StepRecord:
    """The pieces of one outer iteration needed by the key inequality."""

    k: int
    v_prev: PrimalDualPoint
    v_next: PrimalDualPoint
    u_next: PrimalDualPoint
    d: np.ndarray = None


def inexact_correction(tau, y_cmp, y_next, d, sign="derived"):
    """Inexactness term of the key inequality.

    ``derived`` gives ``(1/tau) <y_next - y_cmp, d>``, which follows from
    ``z in d phi^*(y_next)`` with ``z = (y_prev - y_next + d)/tau + x_bar``;
    ``printed`` gives the opposite sign ``(1/tau) <y_cmp - y_next, d>``.
    """
    if d is None:
        return 0.0
    val = _dot(y_next - y_cmp, d) / tau
    if sign == "derived":
        return val
    if sign == "printed":
        return -val
    raise ConfigurationError(f"unknown sign convention {sign!r}")


def key_inequality_terms(prob, metric, delta, rec, v, sign="derived"):
    """Return a dict with LHS, RHS, correction and the residual ``RHS + corr - LHS``."""
    _require_certifiable(prob, delta)
    f1 = prob.f.scaled(delta)
    for p in (rec.v_prev, rec.v_next, rec.u_next, v):
        if metric.variant == "PD3O":
            p.with_grad(f1)
    lhs = psi(prob, delta, rec.u_next) - psi(prob, delta, v) - skew_pairing(v, rec.u_next)
    rhs = (
        d_value(metric, v, rec.v_prev)
        - d_value(metric, v, rec.v_next)
        - dtilde_value(metric, rec.v_next, rec.v_prev, grad_ref=v.grad)
    )
    corr = inexact_correction(metric.tau, v.y, rec.v_next.y, rec.d, sign)
    scale = 1.0 + abs(lhs) + abs(rhs)
    return {"lhs": lhs, "rhs": rhs, "corr": corr, "residual": rhs + corr - lhs, "scale": scale}


def key_inequality_residual(prob, metric, delta, rec, v, sign="derived"):
    """``RHS - LHS`` of the key inequality (plus the inexact correction)."""
    return key_inequality_terms(prob, metric, delta, rec, v, sign)["residual"]


def record_run(prob, config, callback=None):
    """Run a fair solver and collect one ``StepRecord`` per iteration."""
    if not config.fair:
        raise CapabilityError("certificates apply to fair configurations")
    _require_certifiable(prob, config.delta)
    solver = PrimalDual(prob, config)
    records = []

    def collect(prev, new, dual):
        records.append(
            StepRecord(
                k=new.k,
                v_prev=PrimalDualPoint(prev.x, prev.y),
                v_next=PrimalDualPoint(new.x, new.y),
                u_next=PrimalDualPoint(new.x_hat, new.y),
                d=dual.d,
            )
        )
        if callback is not None:
            callback(prev, new, dual)

    trace = solver.run(callback=collect)
    return trace, records


def metric_for(prob, config):
    _, L_f1, _, _ = prob.constants(config.delta)
    return Metric(config.variant, config.sigma, config.tau, L_f1).check()


def reference_point(prob, config, stop_tol=1e-12, max_outer=200000):
    """High-accuracy saddle point from a tighter run of the same solver."""
    from dataclasses import replace

    cfg = replace(config, stop_tol=stop_tol, max_outer=max_outer)
    trace = PrimalDual(prob, cfg).run()
    return PrimalDualPoint(trace.x, trace.y)


def ergodic_gap(records, v_star, prob, delta, grid):
    """Primal-dual gap of the running average ``u_hat^N`` for ``N`` in ``grid``.

    ``Psi(u_hat) - Psi(v*) - <v* - u_hat, F(v*)>``; ``records`` are indexed
    from ``k = 1``.
    """
    grid = sorted(int(n) for n in grid)
    if grid and grid[-1] > len(records):
        raise ConfigurationError("gap grid exceeds the number of recorded iterations")
    psi_star = psi(prob, delta, v_star)
    sx = np.zeros_like(v_star.x)
    sy = np.zeros_like(v_star.y)
    out = []
    j = 0
    for n, rec in enumerate(records, start=1):
        sx = sx + rec.u_next.x
        sy = sy + rec.u_next.y
        while j < len(grid) and grid[j] == n:
            u_hat = PrimalDualPoint(sx / n, sy / n)
            out.append(psi(prob, delta, u_hat) - psi_star - skew_pairing(v_star, u_hat))
            j += 1
    return out


def loglog_slope(ns, values):
    """Least-squares slope of ``log(values)`` against ``log(ns)``."""
    ns = np.asarray(ns, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if np.any(values <= 0):
        raise ConfigurationError("log-log slope needs positive values")
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])


def geometric_grid(lo, hi, per_decade=8):
    n = int(round(per_decade * math.log10(hi / lo))) + 1
    return sorted(set(int(round(v)) for v in np.geomspace(lo, hi, n)))


# ---------------------------------------------------------------- audits


@dataclass
class Report:
    """Certificate audit of one run; ``rows`` feed the CSV report."""

    name: str
    rows: list = field(default_factory=list)
    min_residual: float = math.inf
    min_d: float = math.inf
    min_dtilde: float = math.inf
    telescoping_slack: float = None
    gap_slope: float = None
    gaps: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    COLUMNS = ("k", "d", "dtilde", "residual", "gap")

    @property
    def passed(self):
        return not self.failures


def sample_points(rng, center, n_points, scales=(1e-3, 1.0)):
    """Random comparison points around ``center`` with log-uniform radii."""
    lo, hi = np.log10(scales[0]), np.log10(scales[1])
    pts = []
    for _ in range(n_points):
        r = 10.0 ** rng.uniform(lo, hi)
        pts.append(
            PrimalDualPoint(
                center.x + r * rng.standard_normal(center.x.shape),
                center.y + r * rng.standard_normal(center.y.shape),
            )
        )
    return pts


def audit(prob, config, n_points=50, seed=0, v_star=None, sign="derived", tol=RESIDUAL_TOL):
    """Run ``config`` and check every certificate along the way.

    Per iteration: key-inequality residuals at ``v*`` and ``n_points``
    random comparison points near ``u^{k+1}``, nonnegativity of ``d`` and
    ``dtilde``. Over the run: telescoping of ``dtilde`` against
    ``d(v*; v^0)`` plus the inexact budget, and the ergodic gap.
    """
    rng = np.random.default_rng(seed)
    metric = metric_for(prob, config)
    delta = config.delta
    if v_star is None:
        v_star = reference_point(prob, config)
    f1 = prob.f.scaled(delta)
    v_star.with_grad(f1)
    trace, records = record_run(prob, config)
    report = Report(name=config.name)
    dt_sum = 0.0
    budget = 0.0
    gaps = ergodic_gap(records, v_star, prob, delta, range(1, len(records) + 1))
    for rec, gap in zip(records, gaps):
        if metric.variant == "PD3O":
            rec.v_prev.with_grad(f1)
            rec.v_next.with_grad(f1)
        d_k = d_value(metric, v_star, rec.v_next)
        dt_k = dtilde_value(metric, rec.v_next, rec.v_prev, grad_ref=v_star.grad)
        worst = math.inf
        for v in [v_star] + sample_points(rng, rec.u_next, n_points):
            t = key_inequality_terms(prob, metric, delta, rec, v, sign)
            worst = min(worst, t["residual"])
        report.rows.append({"k": rec.k, "d": d_k, "dtilde": dt_k, "residual": worst, "gap": gap})
        report.min_residual = min(report.min_residual, worst)
        report.min_d = min(report.min_d, d_k)
        report.min_dtilde = min(report.min_dtilde, dt_k)
        dt_sum += dt_k
        budget += inexact_correction(metric.tau, v_star.y, rec.v_next.y, rec.d, sign)
    v0 = PrimalDualPoint(records[0].v_prev.x, records[0].v_prev.y) if records else v_star
    if metric.variant == "PD3O":
        v0.with_grad(f1)
    report.telescoping_slack = d_value(metric, v_star, v0) + budget - dt_sum
    report.gaps = gaps
    if report.min_residual < -tol:
        report.failures.append(f"key inequality residual {report.min_residual:.3e}")
    if report.min_d < -tol:
        report.failures.append(f"negative d {report.min_d:.3e}")
    if report.min_dtilde < -tol:
        report.failures.append(f"negative dtilde {report.min_dtilde:.3e}")
    if report.telescoping_slack < -tol * (1.0 + dt_sum):
        report.failures.append(f"telescoping slack {report.telescoping_slack:.3e}")
    neg = [g for g in gaps if g < -tol]
    if neg:
        report.failures.append(f"negative ergodic gap {min(neg):.3e}")
    return report
