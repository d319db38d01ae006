import math

import numpy as np
import pytest

from fairpd.errors import DimensionError, MetricError, ParameterError
from fairpd.linops import Grad2D
from fairpd.metrics import SNR_CAP_DB, snr, ssim
from fairpd.problems import (
    ExperimentSpec,
    LRTV_PAPER_LF,
    background_block,
    build,
    build_ctv_inpaint,
    build_lrtv_sr,
    gen_nn_lasso,
    gen_quad_nonneg,
    random_mask,
    synth_phantom,
)
from fairpd.prox import L21Norm
from fairpd.solvers import VARIANTS, make_config


def test_lasso_truth_sparsity():
    _, pair = gen_nn_lasso(5, 10, seed=0)
    assert np.count_nonzero(pair.truth) == 2
    _, pair = gen_nn_lasso(5, 11, seed=0)
    assert np.count_nonzero(pair.truth) == math.ceil(0.2 * 11)


def test_lasso_determinism_and_noise_level():
    p1, a = gen_nn_lasso(20, 15, seed=7)
    p2, b = gen_nn_lasso(20, 15, seed=7)
    np.testing.assert_array_equal(p1.f.op.matrix, p2.f.op.matrix)
    np.testing.assert_array_equal(a.observed, b.observed)
    r = a.observed - p1.f.op.matrix @ a.truth
    assert np.linalg.norm(r) / np.linalg.norm(p1.noise) == pytest.approx(0.01, rel=1e-12)
    with pytest.raises(ParameterError):
        gen_nn_lasso(0, 3)


def test_quad_nonneg_truth_is_minimizer():
    for hetero in (False, True):
        prob, pair = gen_quad_nonneg(15, seed=2, hetero=hetero, weight=2.0)
        x = pair.truth
        base = prob.objective(x)
        rng = np.random.default_rng(0)
        for _ in range(50):
            z = np.maximum(x + 0.1 * rng.standard_normal(15), 0.0)
            assert prob.objective(z) >= base - 1e-12


def test_mask_density():
    rng = np.random.default_rng(0)
    w = random_mask((64, 64), 0.15, rng)
    assert abs(int((w == 0).sum()) - round(0.15 * 64 * 64)) <= 1


def test_inpaint_identity_degradation():
    img = synth_phantom(32)
    prob, pair = build_ctv_inpaint(img, missing_frac=0.0, noise_sigma=0.0, seed=3)
    np.testing.assert_array_equal(pair.observed, img)
    assert prob.f.op.norm_sq() == 1.0
    assert pair.observed.shape == pair.forward.out_shape


def test_inpaint_noise_only_on_observed():
    img = synth_phantom(32)
    _, pair = build_ctv_inpaint(img, 0.3, 0.05, seed=1)
    missing = pair.forward.weights == 0
    assert np.all(pair.observed[missing] == 0)
    assert np.any(pair.observed[~missing] != img[~missing])


def test_lrtv_shapes_and_degenerate_pipeline():
    img = synth_phantom(64)
    prob, pair = build_lrtv_sr(img, 1.0, 2)
    assert pair.observed.shape == (32, 32)
    assert prob.L_f == pytest.approx(prob.L_f_estimate)
    assert prob.L_f_estimate <= 1.0 + 1e-6
    assert prob.L_f_paper == LRTV_PAPER_LF
    _, pair1 = build_lrtv_sr(img, 0.0, 1)
    np.testing.assert_allclose(pair1.observed, img, atol=1e-10)
    paper, _ = build_lrtv_sr(img, 1.0, 2, lf_mode="paper")
    assert paper.L_f == LRTV_PAPER_LF
    with pytest.raises(ParameterError):
        build_lrtv_sr(img, lf_mode="guess")


def test_phantom_contract():
    img = synth_phantom(64)
    assert img.shape == (64, 64)
    assert img.min() >= 0 and img.max() <= 1
    np.testing.assert_array_equal(img, synth_phantom(64))
    assert L21Norm(1.0).value(Grad2D(img.shape).apply(img)) > 0
    assert np.linalg.matrix_rank(background_block(img), tol=1e-10) <= 2
    with pytest.raises(ParameterError):
        synth_phantom(8)


@pytest.mark.parametrize(
    "family,preset",
    [("nn_lasso", "lasso"), ("quad_nonneg", "default"), ("ctv_inpaint", "ctv"), ("lrtv_sr", "lrtv")],
)
def test_family_presets_validate(family, preset):
    spec = ExperimentSpec(family=family, m=20, n=15, image_size=16)
    prob, _ = build(spec)
    for variant in VARIANTS:
        for fair in (False, True):
            for name in ("default", preset):
                make_config(prob, variant, fair, 0.5, name)


def test_spec_json_round_trip():
    spec = ExperimentSpec(family="lrtv_sr", image_size=32, lf_mode="paper", seed=5)
    again = ExperimentSpec.from_json(spec.to_json())
    assert again == spec
    with pytest.raises(ParameterError):
        ExperimentSpec(family="nope")
    with pytest.raises(ParameterError):
        ExperimentSpec(family="nn_lasso", delta=0.0)
    with pytest.raises(ParameterError):
        ExperimentSpec(family="ctv_inpaint", missing_frac=1.0)
    with pytest.raises(ParameterError):
        ExperimentSpec(family="ctv_inpaint", lam=-1.0)


def test_snr_values(rng):
    x = rng.standard_normal((8, 8))
    assert snr(2 * x, x) == pytest.approx(0.0, abs=1e-12)
    assert snr(x, x) == SNR_CAP_DB
    y = x + 0.1 * rng.standard_normal((8, 8))
    direct = 10 * np.log10(np.sum(x**2) / np.sum((y - x) ** 2))
    assert snr(y, x) == pytest.approx(direct, rel=1e-12)
    assert snr(-y, -x) == pytest.approx(snr(y, x), rel=1e-12)
    with pytest.raises(MetricError):
        snr(x, np.zeros_like(x))
    with pytest.raises(DimensionError):
        snr(x, x[:4])


def _ssim_oracle(x, ref):
    c1, c2 = 1e-4, 9e-4
    m1, m2 = np.mean(ref), np.mean(x)
    v1, v2 = np.var(ref), np.var(x)
    cov = np.mean(ref * x) - m1 * m2
    return ((2 * m1 * m2 + c1) * (2 * cov + c2)) / ((m1**2 + m2**2 + c1) * (v1 + v2 + c2))


def test_ssim_values(rng):
    x = rng.random((8, 8))
    y = rng.random((8, 8))
    assert ssim(x, x) == 1.0
    assert ssim(y, x) == pytest.approx(_ssim_oracle(y, x), abs=1e-12)
    assert ssim(1.0 - x, x) < 0.0
    assert ssim(np.zeros((4, 4)), np.zeros((4, 4))) == 1.0
