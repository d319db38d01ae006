import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fairpd.errors import DimensionError, ParameterError
from fairpd.linops import Dense, GaussianBlur, Identity, Mask
from fairpd.prox import (
    BoxIndicator,
    L1Norm,
    L21Norm,
    NonNegIndicator,
    NuclearNorm,
    QuadraticFn,
    ZeroFn,
    project_ball21,
    prox_conjugate,
    prox_fn_from_dict,
    prox_l1,
    prox_nuclear,
)


# Independent proxes of the conjugates, prox_{t phi^*}(v).
def conj_l1(w):
    return lambda v, t: np.clip(v, -w, w)


def conj_l21(w):
    def prox(v, t):
        n = np.maximum(np.hypot(v[0], v[1]), 1e-300)
        return v * np.minimum(1.0, w / n)

    return prox


def conj_nuclear(w):
    def prox(v, t):
        U, s, Vt = np.linalg.svd(v, full_matrices=False)
        return (U * np.minimum(s, w)) @ Vt

    return prox


def conj_box(lo, hi):
    # conjugate is the support function z -> sum max(hi z, lo z)
    def prox(v, t):
        return np.where(v > t * hi, v - t * hi, np.where(v < t * lo, v - t * lo, 0.0))

    return prox


PAIRS = [
    ("zero", ZeroFn(), lambda v, t: np.zeros_like(v), (12,)),
    ("l1", L1Norm(0.7), conj_l1(0.7), (12,)),
    ("l21", L21Norm(0.4), conj_l21(0.4), (2, 5, 6)),
    ("nuclear", NuclearNorm(0.9), conj_nuclear(0.9), (6, 5)),
    ("box", BoxIndicator(-0.3, 1.2), conj_box(-0.3, 1.2), (12,)),
    ("nonneg", NonNegIndicator(), lambda v, t: np.minimum(v, 0.0), (12,)),
]


@pytest.mark.parametrize("name,phi,conj_prox,shape", PAIRS, ids=[p[0] for p in PAIRS])
def test_moreau_identity(name, phi, conj_prox, shape, rng):
    for _ in range(100):
        x = 2.0 * rng.standard_normal(shape)
        sigma = 10 ** rng.uniform(-2, 1)
        recon = phi.prox(x, sigma) + sigma * conj_prox(x / sigma, 1.0 / sigma)
        assert np.max(np.abs(recon - x)) <= 1e-10


@pytest.mark.parametrize("name,phi,conj_prox,shape", PAIRS, ids=[p[0] for p in PAIRS])
def test_prox_conjugate_bridge(name, phi, conj_prox, shape, rng):
    a = rng.standard_normal(shape)
    tau = 0.37
    np.testing.assert_allclose(prox_conjugate(phi, a, tau), conj_prox(a, tau), atol=1e-10)


def test_l21_moreau_with_ball_projection(rng):
    p = rng.standard_normal((2, 7, 7))
    lam = 0.5
    recon = L21Norm(1.0).prox(p, lam) + project_ball21(p, lam)
    np.testing.assert_allclose(recon, p, atol=1e-12)


def test_prox_l1_known_values():
    np.testing.assert_allclose(prox_l1(np.array([-2.0, 0.5, 3.0]), 1.0), [-1.0, 0.0, 2.0])


def test_prox_l1_threshold_zero_is_identity(rng):
    a = rng.standard_normal(9)
    np.testing.assert_array_equal(prox_l1(a, 0.0), a)


def test_project_ball21_zero_radius(rng):
    assert np.all(project_ball21(rng.standard_normal((2, 3, 3)), 0.0) == 0)


def test_nuclear_prox_optimality(rng):
    X = rng.standard_normal((8, 6))
    theta = 0.8
    Y = prox_nuclear(X, theta)
    G = (X - Y) / theta  # must be a subgradient of the nuclear norm at Y
    spec = np.linalg.norm(G, 2)
    align = abs(np.vdot(G, Y) - np.linalg.svd(Y, compute_uv=False).sum())
    assert spec <= 1.0 + 1e-6
    assert align <= 1e-6


def test_nuclear_prox_rejects_vectors():
    with pytest.raises(DimensionError):
        prox_nuclear(np.ones(4), 0.1)


def test_negative_weights_rejected():
    with pytest.raises(ParameterError):
        L1Norm(-1.0)
    with pytest.raises(ParameterError):
        prox_l1(np.ones(3), -0.1)
    with pytest.raises(ParameterError):
        BoxIndicator(1.0, 0.0)


def test_indicator_penalty_dropped():
    box = BoxIndicator(0.0, 1.0)
    assert box.value(np.array([2.0])) == np.inf
    assert box.penalty(np.array([2.0])) == 0.0
    assert NonNegIndicator().value(np.array([-1.0])) == np.inf


def test_prox_fn_round_trip():
    for fn in (ZeroFn(), L1Norm(0.2), L21Norm(0.3), NuclearNorm(1.5), BoxIndicator(0, 1),
               NonNegIndicator()):
        again = prox_fn_from_dict(fn.to_dict())
        assert again.to_dict() == fn.to_dict()
    with pytest.raises(ParameterError):
        prox_fn_from_dict({"kind": "nope"})


SMOOTH = [
    lambda rng: QuadraticFn(Dense(rng.standard_normal((15, 10))), rng.standard_normal(15)),
    lambda rng: QuadraticFn(Mask((rng.random((6, 6)) > 0.2) * 1.0), rng.random((6, 6)), 0.8),
    lambda rng: QuadraticFn(GaussianBlur((8, 8), 1.0), rng.random((8, 8)), 2.0),
    lambda rng: QuadraticFn(Identity((5,)), rng.standard_normal(5), 0.0),
]


@pytest.mark.parametrize("make", SMOOTH)
def test_smoothness_inequalities(make, rng):
    f = make(rng)
    L = max(f.lipschitz(), 1e-300)
    for _ in range(100):
        x = rng.standard_normal(f.shape)
        y = rng.standard_normal(f.shape)
        gx, gy = f.grad(x), f.grad(y)
        bregman = f.value(x) - f.value(y) - np.vdot(gy, x - y)
        scale = 1.0 + abs(f.value(x)) + abs(f.value(y))
        assert bregman <= L / 2 * np.sum((x - y) ** 2) + 1e-10 * scale
        if f.weight > 0:
            assert bregman >= np.sum((gx - gy) ** 2) / (2 * L) - 1e-10 * scale


def test_quadratic_gradient_finite_difference(rng):
    f = QuadraticFn(Dense(rng.standard_normal((7, 4))), rng.standard_normal(7), 1.3)
    x = rng.standard_normal(4)
    g = f.grad(x)
    h = 1e-6
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        fd = (f.value(x + e) - f.value(x - e)) / (2 * h)
        assert fd == pytest.approx(g[i], rel=1e-6, abs=1e-8)


def test_quadratic_memo_survives_rescaling(rng):
    f = QuadraticFn(Dense(rng.standard_normal((5, 3))), rng.standard_normal(5))
    half = f.scaled(0.5)
    x = rng.standard_normal(3)
    np.testing.assert_allclose(half.grad(x), 0.5 * f.grad(x))
    assert half.value(x) == pytest.approx(0.5 * f.value(x))
    y = x.copy()
    y[0] += 1.0  # a different array object must not hit the cache
    np.testing.assert_allclose(f.grad(y), f.op.adjoint(f.op.apply(y) - f.offset))


def test_quadratic_offset_shape_checked():
    with pytest.raises(DimensionError):
        QuadraticFn(Identity((3,)), np.zeros(4))


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, 8, elements=st.floats(-50, 50)),
    st.floats(0.0, 10.0),
)
def test_soft_threshold_properties(a, theta):
    out = prox_l1(a, theta)
    assert np.all(np.abs(out) <= np.abs(a) + 1e-12)
    assert np.all(out * a >= 0)
    assert np.all(np.abs(a - out) <= theta + 1e-9)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (2, 3, 3), elements=st.floats(-20, 20)), st.floats(0.0, 5.0))
def test_ball_projection_properties(p, lam):
    q = project_ball21(p, lam)
    assert np.all(np.hypot(q[0], q[1]) <= lam * (1 + 1e-12) + 1e-12)
    np.testing.assert_allclose(project_ball21(q, lam), q, atol=1e-12)
