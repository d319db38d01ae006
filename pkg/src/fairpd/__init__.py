"""Fair primal-dual splitting for ``f + h + g o K`` problems."""
from fairpd.certificates import Metric, PrimalDualPoint, audit
from fairpd.errors import (
    CapabilityError,
    ConfigurationError,
    DimensionError,
    DivergenceError,
    FairPDError,
    MetricError,
    ParameterError,
)
from fairpd.kernels import BACKEND
from fairpd.problems import ExperimentSpec, build
from fairpd.solvers import (
    VARIANTS,
    InnerSpec,
    PrimalDual,
    SaddleProblem,
    SolverConfig,
    make_config,
    run,
    with_inner,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "VARIANTS",
    "CapabilityError",
    "ConfigurationError",
    "DimensionError",
    "DivergenceError",
    "ExperimentSpec",
    "FairPDError",
    "InnerSpec",
    "Metric",
    "MetricError",
    "ParameterError",
    "PrimalDual",
    "PrimalDualPoint",
    "SaddleProblem",
    "SolverConfig",
    "audit",
    "build",
    "make_config",
    "run",
    "with_inner",
]
