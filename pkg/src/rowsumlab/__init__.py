"""rowsumlab: simulation laboratory for log-scaled sums of functions of
triangular-array row means, with normalizing-sequence tables, a heavy-tailed
divergence analysis, and array-CLT diagnostics."""

__version__ = "0.1.0"

from .distributions import (
    DistributionSpec,
    RandomStream,
    exponential,
    finite_discrete,
    lattice_counterexample,
    make_spec,
    normal,
    point_mass,
    rademacher,
    uniform,
)
from .engine import (
    ExperimentConfig,
    ReplicationResult,
    run_experiment,
)
from .errors import (
    ConfigurationError,
    DomainError,
    NumericError,
    OutOfNeighborhoodError,
    RowSumLabError,
    SamplingOverflowError,
)
from .functions import FunctionSpec, cubic_window, log_product, natural_log, quadratic
from .normalizers import NormalizerTable, build_table, counterexample_q_ratio
from .stats import GofReport, gof_report, ks_one_sample, ks_two_sample

__all__ = [
    "ConfigurationError",
    "DistributionSpec",
    "DomainError",
    "ExperimentConfig",
    "FunctionSpec",
    "GofReport",
    "NormalizerTable",
    "NumericError",
    "OutOfNeighborhoodError",
    "RandomStream",
    "ReplicationResult",
    "RowSumLabError",
    "SamplingOverflowError",
    "__version__",
    "build_table",
    "counterexample_q_ratio",
    "cubic_window",
    "exponential",
    "finite_discrete",
    "gof_report",
    "ks_one_sample",
    "ks_two_sample",
    "lattice_counterexample",
    "log_product",
    "make_spec",
    "natural_log",
    "normal",
    "point_mass",
    "quadratic",
    "rademacher",
    "run_experiment",
    "uniform",
]
