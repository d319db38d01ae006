"""Benchmark problem instances, synthetic data and degradation pipelines."""
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from fairpd.errors import ParameterError
from fairpd.linops import Compose, Dense, Downsample, GaussianBlur, Grad2D, Identity, Mask
from fairpd.metrics import snr, ssim  # noqa: F401  (re-exported)
from fairpd.prox import (
    BoxIndicator,
    L1Norm,
    L21Norm,
    NonNegIndicator,
    NuclearNorm,
    QuadraticFn,
)
from fairpd.solvers import SaddleProblem

FAMILIES = ("nn_lasso", "quad_nonneg", "ctv_inpaint", "lrtv_sr")

# the LRTV experiments fixed L_f by hand at this value
LRTV_PAPER_LF = 20.0


@dataclass
class GroundTruthPair:
    truth: np.ndarray
    observed: np.ndarray
    forward: object


@dataclass
class ExperimentSpec:
    """Serializable description of one benchmark instance."""

    family: str
    m: int = 300
    n: int = 100
    image_size: int = 64
    image_path: str = None
    rho: float = 0.01
    lam: float = 0.001
    lam1: float = 0.01
    lam2: float = 0.01
    delta: float = 0.5
    missing_frac: float = 0.15
    noise_sigma: float = 0.02
    blur_sigma: float = 1.0
    factor: int = 2
    weight: float = 1.0
    hetero: bool = False
    lf_mode: str = "estimate"
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown experiment family {self.family!r}")
        for name in ("rho", "lam", "lam1", "lam2", "noise_sigma", "blur_sigma", "weight"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be nonnegative")
        if not 0.0 < self.delta <= 1.0:
            raise ParameterError("delta must be in (0, 1]")
        if not 0.0 <= self.missing_frac < 1.0:
            raise ParameterError("missing_frac must be in [0, 1)")

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def gen_nn_lasso(m, n, seed=0, rho=0.01):
    """Non-negative Lasso ``rho ||x||_1 + 1/2 ||Ax - b||^2`` s.t. ``x >= 0``.

    ``A`` is standard normal, the truth has ``ceil(0.2 n)`` unit entries and
    ``b = A x_true + 0.01 eps``. The constraint is carried by ``g`` with
    ``K = I``, so fair runs see ``g o K + f2`` in the dual.
    """
    if m < 1 or n < 1:
        raise ParameterError("m and n must be >= 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    x_true = np.zeros(n)
    x_true[rng.choice(n, size=math.ceil(0.2 * n), replace=False)] = 1.0
    noise = rng.standard_normal(m)
    b = A @ x_true + 0.01 * noise
    op = Dense(A)
    f = QuadraticFn(op, b, 1.0, op_norm_sq=float(np.linalg.norm(A, 2) ** 2))
    prob = SaddleProblem(
        f=f, h=L1Norm(rho), g=NonNegIndicator(), K=Identity((n,)), name=f"nn_lasso_{m}x{n}"
    )
    prob.noise = noise
    return prob, GroundTruthPair(truth=x_true, observed=b, forward=op)


def gen_quad_nonneg(n=20, seed=0, rho=0.3, weight=1.0, hetero=False):
    """``weight/2 ||W (x - a)||^2 + rho ||x||_1`` s.t. ``x >= 0``.

    ``W`` is the identity, or with ``hetero`` a diagonal with entries drawn
    from U(0.2, 3); the latter keeps a single inner prox-gradient step
    inexact. The dual conjugate ``(delta_{R+} + f2)^*`` is available in
    closed form, which makes this family suitable for the convergence
    certificates. The minimizer is ``max(0, a - rho / (weight W^2))``.
    """
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(n)
    if hetero:
        w = rng.uniform(0.2, 3.0, n)
        op = Mask(w)
    else:
        w = np.ones(n)
        op = Identity((n,))
    f = QuadraticFn(op, w * a, weight)
    prob = SaddleProblem(
        f=f, h=L1Norm(rho), g=NonNegIndicator(), K=Identity((n,)), name=f"quad_nonneg_{n}"
    )
    truth = np.maximum(0.0, a - rho / (weight * w * w)) if weight > 0 else np.zeros(n)
    return prob, GroundTruthPair(truth=truth, observed=a, forward=op)


def random_mask(shape, missing_frac, rng):
    """0/1 mask with exactly ``round(missing_frac * size)`` zeros."""
    size = int(np.prod(shape))
    n_missing = int(round(missing_frac * size))
    weights = np.ones(size)
    weights[rng.choice(size, size=n_missing, replace=False)] = 0.0
    return weights.reshape(shape)


def build_ctv_inpaint(image, missing_frac=0.15, noise_sigma=0.02, seed=0, lam=0.001):
    """Box-constrained TV inpainting.

    ``1/2 ||Phi x - y||^2 + lam TV(x)`` over ``x in [0, 1]``; noise is
    added to the observed pixels only.
    """
    if not 0.0 <= missing_frac < 1.0:
        raise ParameterError("missing_frac must be in [0, 1)")
    image = np.asarray(image, dtype=np.float64)
    rng = np.random.default_rng(seed)
    mask = Mask(random_mask(image.shape, missing_frac, rng))
    noise = noise_sigma * rng.standard_normal(image.shape)
    observed = mask.apply(image + noise)
    f = QuadraticFn(mask, observed, 1.0)
    prob = SaddleProblem(
        f=f,
        h=BoxIndicator(0.0, 1.0),
        g=L21Norm(lam),
        K=Grad2D(image.shape),
        x0=observed.copy(),
        name="ctv_inpaint",
    )
    return prob, GroundTruthPair(truth=image, observed=observed, forward=mask)


def build_lrtv_sr(image, blur_sigma=1.0, factor=2, lam1=0.01, lam2=0.01, lf_mode="estimate"):
    """LRTV super-resolution ``1/2 ||DSx - T||^2 + lam1 ||x||_* + lam2 TV(x)``.

    ``T = D S x_true``. With ``lf_mode="estimate"`` the step sizes use the
    power-iteration estimate of ``||DS||^2``; ``"paper"`` uses the larger
    hand-tuned value ``LRTV_PAPER_LF``, which shrinks the primal steps and
    keeps the one-inner-step fair CV variant stable. Both values are kept on
    the problem (``L_f_estimate``, ``L_f_paper``).
    """
    if lf_mode not in ("estimate", "paper"):
        raise ParameterError(f"unknown lf_mode {lf_mode!r}")
    image = np.asarray(image, dtype=np.float64)
    blur = GaussianBlur(image.shape, blur_sigma)
    forward = Compose(Downsample(image.shape, factor), blur)
    T = forward.apply(image)
    f = QuadraticFn(forward, T, 1.0)
    # nearest-neighbour upsampling of the observation as the starting image
    x0 = np.kron(T, np.ones((factor, factor)))[: image.shape[0], : image.shape[1]]
    prob = SaddleProblem(
        f=f,
        h=NuclearNorm(lam1),
        g=L21Norm(lam2),
        K=Grad2D(image.shape),
        x0=x0,
        name="lrtv_sr",
        L_f=LRTV_PAPER_LF if lf_mode == "paper" else None,
    )
    prob.L_f_estimate = f.lipschitz()
    prob.L_f_paper = LRTV_PAPER_LF
    return prob, GroundTruthPair(truth=image, observed=T, forward=forward)


def synth_phantom(n=64):
    """Deterministic piecewise-constant test image in [0, 1].

    A horizontal linear ramp (rank-1 background) carries two rectangles and
    a disk. The top-left ``n/8 x n/8`` block is pure background.
    """
    if n < 16:
        raise ParameterError("phantom size must be >= 16")
    i, j = np.mgrid[0:n, 0:n].astype(np.float64)
    img = 0.1 + 0.2 * j / (n - 1)
    img[n // 4 : n // 2, n // 5 : (3 * n) // 5] = 0.8
    img[(5 * n) // 8 : (7 * n) // 8, n // 8 : (3 * n) // 8] = 0.55
    r = n / 6.0
    disk = (i - 0.65 * n) ** 2 + (j - 0.7 * n) ** 2 <= r * r
    img[disk] = 0.95
    img[(3 * n) // 8 : (7 * n) // 16, (5 * n) // 16 : n // 2] = 0.35
    return np.clip(img, 0.0, 1.0)


def background_block(img):
    n = img.shape[0]
    b = max(2, n // 8)
    return img[:b, :b]


def load_image(spec):
    if spec.image_path:
        from fairpd.io import read_pgm

        return read_pgm(spec.image_path)
    return synth_phantom(spec.image_size)


def build(spec):
    """Construct ``(SaddleProblem, GroundTruthPair)`` from an ``ExperimentSpec``."""
    if spec.family == "nn_lasso":
        return gen_nn_lasso(spec.m, spec.n, spec.seed, spec.rho)
    if spec.family == "quad_nonneg":
        return gen_quad_nonneg(spec.n, spec.seed, spec.rho, spec.weight, spec.hetero)
    if spec.family == "ctv_inpaint":
        return build_ctv_inpaint(
            load_image(spec), spec.missing_frac, spec.noise_sigma, spec.seed, spec.lam
        )
    if spec.family == "lrtv_sr":
        return build_lrtv_sr(
            load_image(spec), spec.blur_sigma, spec.factor, spec.lam1, spec.lam2, spec.lf_mode
        )
    raise ParameterError(f"unknown family {spec.family!r}")
