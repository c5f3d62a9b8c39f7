"""Mittag-Leffler functions and discrete fractional calculus."""
from .grid import MIN_TIME_NODES, FracOrder, TimeGrid, TimeSeries
from .mlf import ML_BOUND_CONSTANT, MittagLefflerAccuracyError, mittag_leffler
from .operators import (
    PartsResidual,
    ResolutionError,
    check_parts_identities,
    classical_derivative,
    frac_derivative,
    frac_integral,
    rl_integral,
)
from .verify import identity_table

__all__ = [
    "MIN_TIME_NODES",
    "FracOrder",
    "TimeGrid",
    "TimeSeries",
    "ML_BOUND_CONSTANT",
    "MittagLefflerAccuracyError",
    "mittag_leffler",
    "PartsResidual",
    "ResolutionError",
    "check_parts_identities",
    "classical_derivative",
    "frac_derivative",
    "frac_integral",
    "rl_integral",
    "identity_table",
]
