"""sigdecomp: optimization-based decomposition of vector time series.

A series with missing entries is modeled as a sum of K components, each
scored by a loss; the decomposition minimizes the total loss subject to
matching the observed entries.  Solvers touch each loss only through a
masked proximal operator, so classes are freely mixed and matched, and
missing entries are imputed by the sum of the components.
"""

from .exceptions import (
    AmbiguousPhaseError,
    ConfigError,
    ConvergenceError,
    DataError,
    DegenerateProblemError,
    DegenerateScaleError,
    DivergenceError,
    SigDecompError,
)
from .config import ModelConfig, load_config, make_classes_for, parse_config
from .csvio import Table, read_csv, write_matrix_csv
from .losses import CLASS_TABLE, ComponentClass, ProxRequest
from .modelsel import (
    ParamGrid,
    ValidationReport,
    cross_validate,
    grid_search,
    plant_test_mask,
    test_mse,
)
from .signal import Signal, StandardizeRecord, log_transform, standardize
from .solver import (
    Decomposition,
    Problem,
    SolveReport,
    SolverConfig,
    admm_solve,
    bcd_solve,
    hybrid_solve,
    objective,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "SigDecompError",
    "ConfigError",
    "DataError",
    "DegenerateScaleError",
    "DegenerateProblemError",
    "AmbiguousPhaseError",
    "ConvergenceError",
    "DivergenceError",
    "ComponentClass",
    "ProxRequest",
    "CLASS_TABLE",
    "Signal",
    "StandardizeRecord",
    "standardize",
    "log_transform",
    "Problem",
    "SolverConfig",
    "Decomposition",
    "SolveReport",
    "objective",
    "bcd_solve",
    "admm_solve",
    "hybrid_solve",
    "solve",
    "ModelConfig",
    "parse_config",
    "load_config",
    "make_classes_for",
    "Table",
    "read_csv",
    "write_matrix_csv",
    "ParamGrid",
    "ValidationReport",
    "plant_test_mask",
    "test_mse",
    "cross_validate",
    "grid_search",
    "__version__",
]
