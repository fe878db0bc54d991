"""Linear stability of phototactic bioconvection in a scattering suspension
heated from below and lit by oblique collimated light."""
from .basestate import (BaseState, SuspensionParams, TanhTaxis, TwoHarmonicTaxis,
                        base_peak_location, calibrate_critical_intensity, make_taxis,
                        solve_base_state)
from .config import RunConfig
from .errors import (BioconvectError, ConfigError, ConvergenceError, DiscretizationError,
                     DomainError, ShootingError, SingularMatrixError)
from .radiative import OpticalConfig, solve_fredholm
from .stability import (CriticalPoint, NeutralCurve, StabilityConfig, find_critical,
                        trace_neutral_curve)

__version__ = "0.1.0"

__all__ = [
    "BaseState", "BioconvectError", "ConfigError", "ConvergenceError", "CriticalPoint",
    "DiscretizationError", "DomainError", "NeutralCurve", "OpticalConfig", "RunConfig",
    "ShootingError", "SingularMatrixError", "StabilityConfig", "SuspensionParams", "TanhTaxis",
    "TwoHarmonicTaxis", "base_peak_location", "calibrate_critical_intensity", "find_critical",
    "make_taxis", "solve_base_state", "solve_fredholm", "trace_neutral_curve",
]
