"""Catalog of component classes, addressable by stable string identifiers."""

from .base import ComponentClass, ProxRequest
from .basis import (
    Basis,
    SliceSoftBasis,
    SoftBasis,
    fit_basis_svd,
    fit_slice_basis,
)
from .discrete import Markov, SingleJump
from .periodic import Periodic, PeriodicSmooth, SmoothPeriodicClose
from .piecewise import L1SecondDiff, Monotone, weighted_pava
from .quadratic import CloseEntries, QuasiPeriodic, Smooth
from .separable import (
    AverageAbs,
    Boolean,
    Cardinality,
    FiniteSet,
    Huber,
    IndexOffset,
    Interval,
    LogHuber,
    NonNeg,
    Quantile,
    RSparse,
    SumL2,
    SumSquare,
)
from .wrappers import Blockwise, CommonTerm

# string id -> (constructor, accepted config parameter names -> constructor kwarg)
CLASS_TABLE = {
    "sum_square": (SumSquare, {"lambda": "lam"}),
    "abs": (AverageAbs, {"lambda": "lam"}),
    "quantile": (Quantile, {"lambda": "lam", "tau": "tau"}),
    "huber": (Huber, {"lambda": "lam", "huber_m": "M"}),
    "log_huber": (LogHuber, {"lambda": "lam", "huber_m": "M"}),
    "sum_l2": (SumL2, {"lambda": "lam"}),
    "nonneg": (NonNeg, {}),
    "interval": (Interval, {"lo": "lo", "hi": "hi"}),
    "finite_set": (FiniteSet, {"values": "values"}),
    "boolean": (Boolean, {"amplitude": "amplitude"}),
    "card": (Cardinality, {"lambda": "lam"}),
    "r_sparse": (RSparse, {"r": "r"}),
    "index_offset": (IndexOffset, {}),
    "smooth1": (lambda **kw: Smooth(order=1, **kw), {"lambda": "lam"}),
    "smooth2": (lambda **kw: Smooth(order=2, **kw), {"lambda": "lam"}),
    "l1_second_diff": (
        L1SecondDiff,
        {"lambda": "lam", "first_value_zero": "first_value_zero"},
    ),
    "monotone": (Monotone, {"extra_smooth": "extra_smooth"}),
    "periodic": (Periodic, {"period": "period"}),
    "periodic_smooth": (
        PeriodicSmooth,
        {"lambda": "lam", "period": "period", "zero_sum": "zero_sum"},
    ),
    "quasi_periodic": (QuasiPeriodic, {"lambda": "lam", "period": "period"}),
    "smooth_periodic_close": (
        SmoothPeriodicClose,
        {
            "lambda1": "lam_smooth",
            "lambda2": "lam_close",
            "period": "period",
            "boundary_smooth": "boundary_smooth",
        },
    ),
    "close_entries": (CloseEntries, {"lambda": "lam"}),
    "markov": (Markov, {"values": "values", "C": "C", "c": "c"}),
    "single_jump": (SingleJump, {"lambda": "lam", "jump_sign": "sign"}),
    "basis": (Basis, {"theta": "theta"}),
    "soft_basis": (SoftBasis, {"lambda": "lam", "theta": "theta"}),
    "slice_soft_basis": (
        SliceSoftBasis,
        {"lambda": "lam", "slice_basis": "slice_basis"},
    ),
    "blockwise_l1": (
        lambda **kw: Blockwise(penalty="l1", **kw),
        {"block_len": "block_len", "lambda": "lam"},
    ),
    "blockwise_mean": (
        lambda **kw: Blockwise(penalty="none", **kw),
        {"block_len": "block_len"},
    ),
}

__all__ = [
    "ComponentClass",
    "ProxRequest",
    "SumSquare",
    "AverageAbs",
    "Quantile",
    "Huber",
    "LogHuber",
    "SumL2",
    "NonNeg",
    "Interval",
    "FiniteSet",
    "Boolean",
    "Cardinality",
    "RSparse",
    "IndexOffset",
    "Smooth",
    "QuasiPeriodic",
    "CloseEntries",
    "Periodic",
    "PeriodicSmooth",
    "SmoothPeriodicClose",
    "L1SecondDiff",
    "Monotone",
    "weighted_pava",
    "Markov",
    "SingleJump",
    "Basis",
    "SoftBasis",
    "SliceSoftBasis",
    "fit_basis_svd",
    "fit_slice_basis",
    "CommonTerm",
    "Blockwise",
    "CLASS_TABLE",
]
