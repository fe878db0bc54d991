import functools
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from bioconvect.basestate import (SuspensionParams, TwoHarmonicTaxis,  # noqa: E402
                                  calibrate_critical_intensity, solve_base_state)
from bioconvect.radiative import OpticalConfig  # noqa: E402


@functools.lru_cache(maxsize=None)
def calibrated_gc(kappa, omega, V_c=15.0):
    p = SuspensionParams(optical=OpticalConfig(kappa, omega, 0.0), V_c=V_c)
    return calibrate_critical_intensity(p)


@functools.lru_cache(maxsize=None)
def reference_params(kappa=1.0, omega=0.4, theta_i=0.0, top="rigid", V_c=15.0, Le=4.0, R_T=100.0):
    return SuspensionParams(optical=OpticalConfig(kappa, omega, theta_i),
                            taxis=TwoHarmonicTaxis(G_c=calibrated_gc(kappa, omega, V_c)),
                            V_c=V_c, Le=Le, R_T=R_T, top=top)


@functools.lru_cache(maxsize=None)
def reference_base(**kw):
    return solve_base_state(reference_params(**kw))


@pytest.fixture(scope="session")
def base_rigid_theta40():
    return reference_base(kappa=1.0, omega=0.4, theta_i=40.0)
