"""Primal-dual splitting for ``min_x f(x) + h(x) + g(Kx)``.

Four classical schemes (Condat-Vu, PDFP, AFBA, PD3O) share one loop::

    x_hat  = prox_{sigma h}(x - sigma (y_term + grad(x)))
    x_bar  = iteration_I(...)
    y_next = dual step
    x_next = iteration_II(...)

In the *original* form ``y`` lives in the range of ``K``, ``y_term = K^T y``,
``grad`` is the gradient of the whole smooth term and the dual step is
``prox_{tau g^*}(y + tau K x_bar)``.

In the *fair* form the smooth term is split as ``f1 = delta f`` and
``f2 = (1 - delta) f``; ``y`` lives in the primal space, ``y_term = y``,
``grad = grad f1`` and the dual step is the prox of ``tau (g o K + f2)^*``,
evaluated either in closed form (small class of problems) or inexactly
through an inner solve of

    min_z g(Kz) + f2(z) + tau/2 ||z - z_bar||^2,   z_bar = y / tau + x_bar

which yields ``y_next = tau z_bar - tau z + d`` with ``d`` a subgradient of
the inner objective at ``z``.
"""
import math
import time
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from fairpd import metrics
from fairpd.errors import CapabilityError, ConfigurationError, DivergenceError
from fairpd.linops import Identity
from fairpd.prox import prox_conjugate

VARIANTS = ("CV", "PDFP", "AFBA", "PD3O")
PRESETS = ("default", "lasso", "lrtv", "ctv")
INNER_METHODS = ("auto", "exact", "prox_grad", "condat_vu")

# relative slack for accepting step sizes that sit exactly on the boundary
# of the convergence region (the published Condat-Vu presets do)
BOUNDARY_RTOL = 1e-12


def _norm(a):
    a = a.ravel()
    return math.sqrt(float(a @ a))


@dataclass
class SaddleProblem:
    """``f + h + g o K`` with ``f`` a quadratic data term.

    The split ``f1 = delta f``, ``f2 = (1 - delta) f`` is taken per solver
    configuration, so one problem serves original and fair runs alike.
    """

    f: object
    h: object
    g: object
    K: object
    x0: np.ndarray = None
    name: str = ""
    L_f: float = None
    K_norm_sq: float = None

    def __post_init__(self):
        if self.K.in_shape != self.f.shape:
            raise ConfigurationError("K and f act on different primal shapes")
        if self.L_f is None:
            self.L_f = self.f.lipschitz()
        if self.K_norm_sq is None:
            self.K_norm_sq = self.K.norm_sq()

    @property
    def shape(self):
        return self.f.shape

    def split(self, delta):
        return self.f.scaled(delta), self.f.scaled(1.0 - delta)

    def constants(self, delta):
        """``(L_f, L_f1, L_f2, ||K||^2)`` for a given split."""
        return self.L_f, delta * self.L_f, (1.0 - delta) * self.L_f, self.K_norm_sq

    def objective(self, x):
        """``f(x) + h(x) + g(Kx)`` with indicator terms dropped."""
        return self.f.value(x) + self.h.penalty(x) + self.g.penalty(self.K.apply(x))

    def initial_x(self):
        if self.x0 is None:
            return np.zeros(self.shape)
        return np.array(self.x0, dtype=np.float64, copy=True)


@dataclass
class InnerSpec:
    """How the fair dual subproblem is solved.

    ``method``: ``exact`` (closed form), ``prox_grad`` (needs ``K`` = I),
    ``condat_vu`` (general ``K``) or ``auto`` (prox_grad when ``K`` is the
    identity, condat_vu otherwise). ``mode``: ``budget`` runs exactly
    ``count`` inner steps; ``criterion`` iterates until
    ``||d|| max(1, ||y||) <= eps_k`` or ``hard_cap`` steps, with
    ``eps_k = eps_scale / k**eps_power``.
    """

    method: str = "auto"
    mode: str = "budget"
    count: int = 1
    hard_cap: int = 10000
    eps_scale: float = 1.0
    eps_power: float = 2.0
    sigma: float = None
    tau: float = None

    def eps(self, k):
        return self.eps_scale / float(k) ** self.eps_power


@dataclass
class SolverConfig:
    variant: str
    fair: bool
    sigma: float
    tau: float
    delta: float = 1.0
    inner: InnerSpec = field(default_factory=InnerSpec)
    stop_tol: float = 1e-6  # None runs all max_outer iterations
    max_outer: int = 1000
    seed: int = 0

    @property
    def name(self):
        return ("F" if self.fair else "") + self.variant

    def to_dict(self):
        return asdict(self)


@dataclass
class IterationState:
    x: np.ndarray
    y: np.ndarray
    k: int = 0
    x_hat: np.ndarray = None
    x_bar: np.ndarray = None
    z_bar: np.ndarray = None
    z: np.ndarray = None
    w: np.ndarray = None
    d: np.ndarray = None
    grad_x: np.ndarray = None


@dataclass
class Trace:
    """Per-iteration record of a run.

    ``f_value`` is the full objective at ``x^{k+1}`` with indicator terms
    dropped; ``time_s`` is cumulative wall time from a monotonic clock.
    """

    name: str
    k: list = field(default_factory=list)
    time_s: list = field(default_factory=list)
    resi: list = field(default_factory=list)
    f_value: list = field(default_factory=list)
    snr: list = field(default_factory=list)
    ssim: list = field(default_factory=list)
    inner_iters: list = field(default_factory=list)
    d_norm: list = field(default_factory=list)
    status: str = "running"
    warnings: list = field(default_factory=list)
    x: np.ndarray = None
    y: np.ndarray = None

    COLUMNS = ("k", "time_s", "resi", "f_value", "snr", "ssim", "inner_iters", "d_norm")

    @property
    def iterations(self):
        return len(self.k)

    @property
    def cpu(self):
        return self.time_s[-1] if self.time_s else 0.0

    def rows(self):
        return [
            {c: getattr(self, c)[i] for c in self.COLUMNS} for i in range(self.iterations)
        ]

    def first_below(self, tol):
        """1-based iteration index where ``resi <= tol`` first holds, or None."""
        for i, r in enumerate(self.resi):
            if r <= tol:
                return i + 1
        return None


def check_stepsizes(variant, fair, sigma, tau, L_f, L_f1, K_norm_sq):
    """Raise ``ConfigurationError`` unless the convergence conditions hold.

    Original: CV needs ``sigma tau ||K||^2 < 1 - sigma L_f``; the others need
    ``sigma tau ||K||^2 < 1`` and ``sigma L_f < 1``. Fair: the same with
    ``||K||^2`` replaced by 1 and ``L_f`` by ``L_f1``.
    """
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}")
    if not (sigma > 0 and tau > 0) or not (math.isfinite(sigma) and math.isfinite(tau)):
        raise ConfigurationError(f"step sizes must be positive, got sigma={sigma}, tau={tau}")
    lip = L_f1 if fair else L_f
    knorm = 1.0 if fair else K_norm_sq
    st = sigma * tau * knorm
    slack = BOUNDARY_RTOL
    if variant == "CV":
        if st > (1.0 - sigma * lip) + slack:
            raise ConfigurationError(
                f"{'F' if fair else ''}CV step sizes violate sigma*tau*L < 1 - sigma*L_f: "
                f"{st:.6g} vs {1.0 - sigma * lip:.6g}"
            )
    else:
        if st >= 1.0 + slack:
            raise ConfigurationError(f"sigma*tau*L = {st:.6g} must be < 1")
        if sigma * lip >= 1.0 + slack:
            raise ConfigurationError(f"sigma*L_f = {sigma * lip:.6g} must be < 1")


def stepsize_plan(variant, fair, L_f, L_f1, K_norm_sq, preset="default"):
    """Return ``(sigma, tau)`` for a named experiment preset.

    ``L`` in the published step-size lists is read as ``||K||^2``.
    ``default`` gives a pair with a 0.9 safety margin.
    """
    if preset not in PRESETS:
        raise ConfigurationError(f"unknown preset {preset!r}")
    lip = L_f1 if fair else L_f
    knorm = 1.0 if fair else K_norm_sq
    if not (lip > 0 and knorm > 0):
        raise ConfigurationError("Lipschitz constant and ||K||^2 must be positive")
    if variant == "CV":
        if preset == "lasso":
            st = 0.25
        elif preset == "lrtv":
            st = 0.1 if fair else 1.0 / 80.0
        else:
            st = None
        if st is None:
            sigma = 0.5 / lip
            tau = 0.9 * 0.5 / (sigma * knorm)
        else:
            sigma = (1.0 - st * knorm) / lip
            tau = st / sigma if sigma > 0 else float("nan")
    elif variant in VARIANTS:
        sigma = 0.9 / lip
        tau = 0.9 / (knorm * sigma)
    else:
        raise ConfigurationError(f"unknown variant {variant!r}")
    check_stepsizes(variant, fair, sigma, tau, L_f, L_f1, K_norm_sq)
    return sigma, tau


def validate(prob, config):
    """Check a configuration against a problem; returns the config."""
    if config.variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {config.variant!r}")
    if not 0.0 < config.delta <= 1.0:
        raise ConfigurationError(f"delta must be in (0, 1], got {config.delta}")
    if (config.stop_tol is not None and config.stop_tol < 0) or config.max_outer < 1:
        raise ConfigurationError("stop_tol must be >= 0 (or None) and max_outer >= 1")
    inner = config.inner
    if inner.method not in INNER_METHODS:
        raise ConfigurationError(f"unknown inner method {inner.method!r}")
    if inner.mode not in ("budget", "criterion"):
        raise ConfigurationError(f"unknown inner mode {inner.mode!r}")
    if inner.count < 1 or inner.hard_cap < 1:
        raise ConfigurationError("inner count and hard cap must be >= 1")
    delta = config.delta if config.fair else 1.0
    L_f, L_f1, _, knorm = prob.constants(delta)
    check_stepsizes(config.variant, config.fair, config.sigma, config.tau, L_f, L_f1, knorm)
    if config.fair:
        _, f2 = prob.split(config.delta)
        method = resolve_inner_method(inner.method, prob.g, f2, prob.K)
        if method == "exact" and not exact_dual_supported(prob.g, f2, prob.K):
            raise CapabilityError("closed-form dual step unavailable; use an inner solver")
    return config


# ---------------------------------------------------------------- steps


def primal_step(h, x, y_term, grad_x, sigma):
    """``prox_{sigma h}(x - sigma (y_term + grad_x))``."""
    return h.prox(x - sigma * (y_term + grad_x), sigma)


def iteration_I(variant, x, x_hat, sigma, grad_x=None, grad_hat=None):
    """Extrapolated point fed to the dual step."""
    if variant == "CV":
        return 2.0 * x_hat - x
    if variant in ("PDFP", "AFBA"):
        return x_hat
    if variant == "PD3O":
        return 2.0 * x_hat - x + sigma * (grad_x - grad_hat)
    raise ConfigurationError(f"unknown variant {variant!r}")


def iteration_II(variant, x, x_hat, x_bar, sigma, h=None, y_term=None, y_term_next=None,
                 grad_x=None):
    """Primal correction after the dual step."""
    if variant in ("CV", "PD3O"):
        return x_hat
    if variant == "PDFP":
        return primal_step(h, x, y_term_next, grad_x, sigma)
    if variant == "AFBA":
        return x_bar - sigma * (y_term_next - y_term)
    raise ConfigurationError(f"unknown variant {variant!r}")


def exact_dual_supported(g, f2, K):
    if not isinstance(K, Identity):
        return False
    if f2.weight == 0.0:
        return True
    return f2.is_diagonal and g.interval is not None


def resolve_inner_method(method, g, f2, K):
    if method == "auto":
        return "prox_grad" if isinstance(K, Identity) else "condat_vu"
    return method


def dual_step_exact(g, f2, K, y, x_bar, tau):
    """Closed-form ``prox_{tau (g o K + f2)^*}(y + tau x_bar)``.

    Returns ``(y_next, z)`` with ``z`` the inner minimizer.
    """
    if not exact_dual_supported(g, f2, K):
        raise CapabilityError(
            "no closed form for prox of (g o K + f2)^*; use dual_step_inexact"
        )
    z_bar = y / tau + x_bar
    if f2.weight == 0.0:
        z = g.prox(z_bar, 1.0 / tau)
    else:
        m = f2.diagonal()
        beta = f2.weight
        z = (beta * m * f2.offset + tau * z_bar) / (beta * m * m + tau)
        lo, hi = g.interval
        z = np.clip(z, lo, hi)
    return tau * (z_bar - z), z


@dataclass
class DualResult:
    y: np.ndarray
    z: np.ndarray
    d: np.ndarray
    inner_iters: int
    w: np.ndarray = None
    capped: bool = False


def _inner_steps(inner, tau, f2, K):
    lip_s = f2.lipschitz() + tau
    if inner.sigma is not None:
        s_in = inner.sigma
    else:
        s_in = 0.5 / lip_s
    if inner.tau is not None:
        t_in = inner.tau
    else:
        knorm = K.norm_sq()
        t_in = 0.9 * (1.0 - s_in * lip_s) / (s_in * knorm)
    return s_in, t_in


def dual_step_inexact(g, f2, K, y, x_bar, tau, inner, eps, z0=None, w0=None):
    """Inexact fair dual step by an inner solver (warm-started at ``z0``).

    prox_grad: ``z+ = prox_{gamma g}(z - gamma grad s(z))`` with
    ``s = f2 + tau/2 ||. - z_bar||^2`` and ``gamma = 1 / (L_f2 + tau)``;
    ``d = (z - z+)/gamma + grad s(z+) - grad s(z)`` is an exact subgradient.

    condat_vu: primal-dual iteration on ``s(z) + g(Kz)`` with inner dual
    ``w``; ``d = K^T w+ + grad s(z+)`` is a surrogate subgradient, exact
    only in the inner limit.
    """
    z_bar = y / tau + x_bar
    method = resolve_inner_method(inner.method, g, f2, K)
    z = x_bar.copy() if z0 is None else z0
    criterion = inner.mode == "criterion"
    steps = inner.hard_cap if criterion else inner.count

    def grad_s(v):
        return f2.grad(v) + tau * (v - z_bar)

    gz = grad_s(z)
    capped = False
    if method == "prox_grad":
        if not isinstance(K, Identity):
            raise CapabilityError("prox_grad inner solver needs K = identity")
        gamma = 1.0 / (f2.lipschitz() + tau)
        w = None
        for i in range(steps):
            z_new = g.prox(z - gamma * gz, gamma)
            gz_new = grad_s(z_new)
            d = (z - z_new) / gamma + gz_new - gz
            y_new = tau * (z_bar - z_new) + d
            z, gz = z_new, gz_new
            if criterion and _norm(d) * max(1.0, _norm(y_new)) <= eps:
                break
        else:
            capped = criterion
    elif method == "condat_vu":
        s_in, t_in = _inner_steps(inner, tau, f2, K)
        w = np.zeros(K.out_shape) if w0 is None else w0
        for i in range(steps):
            z_new = z - s_in * (gz + K.adjoint(w))
            w = prox_conjugate(g, w + t_in * K.apply(2.0 * z_new - z), t_in)
            gz_new = grad_s(z_new)
            d = K.adjoint(w) + gz_new
            y_new = tau * (z_bar - z_new) + d
            z, gz = z_new, gz_new
            if criterion and _norm(d) * max(1.0, _norm(y_new)) <= eps:
                break
        else:
            capped = criterion
    else:
        raise CapabilityError(f"inner method {method!r} is not an iterative solver")
    return DualResult(y=y_new, z=z, d=d, inner_iters=i + 1, w=w, capped=capped)


# ---------------------------------------------------------------- solver


class PrimalDual:
    """One original or fair primal-dual method bound to a problem."""

    def __init__(self, prob, config):
        validate(prob, config)
        self.prob = prob
        self.config = config
        self.variant = config.variant
        self.fair = config.fair
        K = prob.K
        if self.fair:
            self.f1, self.f2 = prob.split(config.delta)
            self.inner_method = resolve_inner_method(config.inner.method, prob.g, self.f2, K)
            self._lift = lambda y: y
        else:
            self.f1, self.f2 = prob.f, None
            self.inner_method = None
            self._lift = K.adjoint

    def initial_state(self):
        x = self.prob.initial_x()
        y_shape = self.prob.shape if self.fair else self.prob.K.out_shape
        st = IterationState(x=x, y=np.zeros(y_shape), k=0)
        st.grad_x = self.f1.grad(x)
        st.z = x.copy()
        if self.fair and self.inner_method == "condat_vu":
            st.w = np.zeros(self.prob.K.out_shape)
        return st

    def dual_step(self, st, x_bar):
        cfg = self.config
        tau = cfg.tau
        prob = self.prob
        if not self.fair:
            y_next = prox_conjugate(prob.g, st.y + tau * prob.K.apply(x_bar), tau)
            return DualResult(y=y_next, z=None, d=None, inner_iters=0)
        if self.inner_method == "exact":
            y_next, z = dual_step_exact(prob.g, self.f2, prob.K, st.y, x_bar, tau)
            return DualResult(y=y_next, z=z, d=np.zeros_like(z), inner_iters=0)
        eps = cfg.inner.eps(st.k + 1)
        return dual_step_inexact(
            prob.g, self.f2, prob.K, st.y, x_bar, tau, cfg.inner, eps, z0=st.z, w0=st.w
        )

    def step(self, st):
        """One outer iteration; returns ``(new_state, dual_result)``."""
        sigma = self.config.sigma
        h = self.prob.h
        y_term = self._lift(st.y)
        x_hat = primal_step(h, st.x, y_term, st.grad_x, sigma)
        grad_hat = self.f1.grad(x_hat) if self.variant in ("PD3O", "CV") else None
        x_bar = iteration_I(self.variant, st.x, x_hat, sigma, st.grad_x, grad_hat)
        dual = self.dual_step(st, x_bar)
        y_term_next = self._lift(dual.y) if self.variant in ("PDFP", "AFBA") else None
        x_next = iteration_II(
            self.variant, st.x, x_hat, x_bar, sigma, h, y_term, y_term_next, st.grad_x
        )
        grad_next = grad_hat if x_next is x_hat else self.f1.grad(x_next)
        new = IterationState(
            x=x_next,
            y=dual.y,
            k=st.k + 1,
            x_hat=x_hat,
            x_bar=x_bar,
            z_bar=None if not self.fair else st.y / self.config.tau + x_bar,
            z=dual.z if dual.z is not None else st.z,
            w=dual.w if dual.w is not None else st.w,
            d=dual.d,
            grad_x=grad_next,
        )
        return new, dual

    def run(self, truth=None, callback=None, record_state=False):
        cfg = self.config
        trace = Trace(name=cfg.name)
        st = self.initial_state()
        t0 = time.perf_counter()
        n_capped = 0
        for _ in range(cfg.max_outer):
            new, dual = self.step(st)
            x_norm = _norm(st.x)
            step_norm = _norm(new.x - st.x)
            y_norm = _norm(new.y)
            if not (math.isfinite(step_norm) and math.isfinite(y_norm)):
                trace.status = "diverged"
                trace.x, trace.y = st.x, st.y
                raise DivergenceError(
                    f"{cfg.name}: non-finite iterate at k={new.k}", trace=trace, state=st
                )
            resi = step_norm / x_norm if x_norm >= 1e-14 else step_norm
            if dual.capped:
                n_capped += 1
            if callback is not None:
                callback(st, new, dual)
            trace.k.append(new.k)
            trace.time_s.append(time.perf_counter() - t0)
            trace.resi.append(resi)
            trace.f_value.append(self.prob.objective(new.x))
            if truth is not None:
                trace.snr.append(metrics.snr(new.x, truth))
                trace.ssim.append(metrics.ssim(new.x, truth))
            else:
                trace.snr.append(float("nan"))
                trace.ssim.append(float("nan"))
            trace.inner_iters.append(dual.inner_iters)
            trace.d_norm.append(_norm(dual.d) if dual.d is not None else 0.0)
            st = new
            # a first step taken from y = 0 can leave x in place without
            # being stationary, so the stopping rule starts at k = 2
            if cfg.stop_tol is not None and resi <= cfg.stop_tol and new.k > 1:
                trace.status = "converged"
                break
        else:
            trace.status = "max_outer"
        if n_capped:
            msg = f"{cfg.name}: inner criterion hit the hard cap in {n_capped} outer iterations"
            trace.warnings.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
        trace.x, trace.y = st.x, st.y
        if record_state:
            trace.state = st
        return trace


def run(prob, config, truth=None, callback=None):
    """Run one method to ``resi <= stop_tol`` or ``max_outer`` iterations."""
    return PrimalDual(prob, config).run(truth=truth, callback=callback)


def make_config(prob, variant, fair, delta=1.0, preset="default", **kwargs):
    """Build a validated ``SolverConfig`` with step sizes from ``stepsize_plan``."""
    d = delta if fair else 1.0
    L_f, L_f1, _, knorm = prob.constants(d)
    sigma, tau = stepsize_plan(variant, fair, L_f, L_f1, knorm, preset)
    cfg = SolverConfig(variant=variant, fair=fair, sigma=sigma, tau=tau, delta=delta, **kwargs)
    return validate(prob, cfg)


def with_inner(config, **changes):
    return replace(config, inner=replace(config.inner, **changes))
