"""Linear stability of the equilibrium suspension."""
from .coefficients import (AlephCoefficients, CellCoefficients, assemble_coefficients,
                           cell_coefficients)
from .neutral import (RangeWarning, count_vertical_modes, find_critical, leading_growth_rate,
                      solve_marginal_point, trace_neutral_curve)
from .types import CriticalPoint, EigenSolution, NeutralCurve, NeutralPoint, StabilityConfig

__all__ = [
    "AlephCoefficients", "CellCoefficients", "CriticalPoint", "EigenSolution", "NeutralCurve",
    "NeutralPoint", "RangeWarning", "StabilityConfig", "assemble_coefficients",
    "cell_coefficients", "count_vertical_modes", "find_critical", "leading_growth_rate",
    "solve_marginal_point", "trace_neutral_curve",
]
