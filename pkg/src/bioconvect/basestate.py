"""Equilibrium (motionless) state of the suspension.

Cells swim up the light where it is weaker than the critical intensity
and down where it is stronger, so at equilibrium

    dn/dz = V_c M(G(tau)) n,      dtau/dz = -kappa n,

with tau(1) = 0 and the mean concentration fixed to one, i.e. tau(0) = kappa.
The temperature falls linearly from the heated bottom.
"""
import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.integrate
import scipy.interpolate

from .errors import BracketError, ShootingError, StiffnessError
from .numerics import GridFunction, brent_root, integrate_ode
from .radiative import (DEFAULT_N_MU, FredholmSolution, LocalBase, OpticalConfig,
                        assemble_radiation_field, polar_rule, solve_fredholm)

DEFAULT_GRID = 257
DEFAULT_CRITICAL_INTENSITY = 1.3


# --------------------------------------------------------------------------
# phototaxis

class TaxisModel:
    """Photoresponse M(G): positive below the critical intensity, negative above."""

    G_c: float

    def response(self, G):
        raise NotImplementedError

    def derivative(self, G):
        raise NotImplementedError

    def second_derivative(self, G):
        raise NotImplementedError

    def scalar(self, G):
        return float(self.response(np.asarray(G, dtype=float)))


@dataclass(frozen=True)
class TwoHarmonicTaxis(TaxisModel):
    """M = a sin(3 pi L/2) - b sin(pi L/2) with L = G/G_m clipped to [0, 1].

    ``G_m`` is chosen so that the zero of M sits at ``G_c``.
    """
    G_c: float = DEFAULT_CRITICAL_INTENSITY
    a: float = 0.8
    b: float = 0.1
    G_m: float = field(init=False)

    def __post_init__(self):
        if not self.G_c > 0:
            raise ValueError("G_c must be positive")

        def m(lam):
            return self.a * math.sin(1.5 * math.pi * lam) - self.b * math.sin(0.5 * math.pi * lam)
        lam_c = brent_root(m, (0.2, 0.95), tol=1e-15)
        object.__setattr__(self, "G_m", self.G_c / lam_c)

    def _lam(self, G):
        return np.clip(np.asarray(G, dtype=float) / self.G_m, 0.0, 1.0)

    def response(self, G):
        lam = self._lam(G)
        return self.a * np.sin(1.5 * np.pi * lam) - self.b * np.sin(0.5 * np.pi * lam)

    def derivative(self, G):
        G = np.asarray(G, dtype=float)
        lam = self._lam(G)
        inside = (G > 0) & (G < self.G_m)
        d = (1.5 * np.pi * self.a * np.cos(1.5 * np.pi * lam)
             - 0.5 * np.pi * self.b * np.cos(0.5 * np.pi * lam)) / self.G_m
        return np.where(inside, d, 0.0)

    def second_derivative(self, G):
        G = np.asarray(G, dtype=float)
        lam = self._lam(G)
        inside = (G > 0) & (G < self.G_m)
        d2 = (-(1.5 * np.pi) ** 2 * self.a * np.sin(1.5 * np.pi * lam)
              + (0.5 * np.pi) ** 2 * self.b * np.sin(0.5 * np.pi * lam)) / self.G_m ** 2
        return np.where(inside, d2, 0.0)

    def scalar(self, G):
        lam = min(max(G / self.G_m, 0.0), 1.0)
        return self.a * math.sin(1.5 * math.pi * lam) - self.b * math.sin(0.5 * math.pi * lam)


@dataclass(frozen=True)
class TanhTaxis(TaxisModel):
    """M = amplitude tanh(steepness (G_c - G)); an alternative smooth response."""
    G_c: float = DEFAULT_CRITICAL_INTENSITY
    amplitude: float = 0.8
    steepness: float = 4.0

    def response(self, G):
        return self.amplitude * np.tanh(self.steepness * (self.G_c - np.asarray(G, dtype=float)))

    def derivative(self, G):
        t = np.tanh(self.steepness * (self.G_c - np.asarray(G, dtype=float)))
        return -self.amplitude * self.steepness * (1 - t ** 2)

    def second_derivative(self, G):
        t = np.tanh(self.steepness * (self.G_c - np.asarray(G, dtype=float)))
        return -2 * self.amplitude * self.steepness ** 2 * t * (1 - t ** 2)

    def scalar(self, G):
        return self.amplitude * math.tanh(self.steepness * (self.G_c - G))


TAXIS_FORMS = {"two_harmonic": TwoHarmonicTaxis, "tanh": TanhTaxis}


def make_taxis(form="two_harmonic", G_c=DEFAULT_CRITICAL_INTENSITY, **kwargs) -> TaxisModel:
    try:
        cls = TAXIS_FORMS[form]
    except KeyError:
        raise ValueError(f"unknown taxis form {form!r}; choose from {sorted(TAXIS_FORMS)}") from None
    return cls(G_c=G_c, **kwargs)


def taxis_eval(model: TaxisModel, G):
    """Response and its derivative with respect to the intensity."""
    if np.any(np.asarray(G) < 0):
        raise ValueError("intensity must be non-negative")
    return model.response(G), model.derivative(G)


# --------------------------------------------------------------------------
# parameters and state

BOUNDARY_TYPES = ("rigid", "stress_free")


@dataclass(frozen=True)
class SuspensionParams:
    optical: OpticalConfig
    taxis: TaxisModel = field(default_factory=TwoHarmonicTaxis)
    V_c: float = 15.0
    Pr: float = 5.0
    Le: float = 4.0
    R_b: float = 0.0
    R_T: float = 100.0
    top: str = "stress_free"
    bottom: str = "rigid"

    def __post_init__(self):
        if self.V_c < 0:
            raise ValueError("V_c must be >= 0")
        if not self.Pr > 0 or not self.Le > 0:
            raise ValueError("Pr and Le must be positive")
        if self.top not in BOUNDARY_TYPES or self.bottom not in BOUNDARY_TYPES:
            raise ValueError(f"boundaries must be one of {BOUNDARY_TYPES}")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class BaseSample(LocalBase):
    """Equilibrium profiles on an arbitrary grid, with the derivatives the
    perturbation equations need."""
    dn_p: np.ndarray = None
    M: np.ndarray = None
    dM: np.ndarray = None
    d2M: np.ndarray = None
    dG: np.ndarray = None       # d G_p / dz
    dG_c: np.ndarray = None     # d G_p^c / dz
    q_p: np.ndarray = None


@dataclass
class BaseState:
    params: SuspensionParams
    z_grid: np.ndarray
    n_p: np.ndarray
    tau: np.ndarray
    G_p: np.ndarray
    G_p_c: np.ndarray
    G_p_d: np.ndarray
    q_p: np.ndarray
    M_p: np.ndarray
    dM_p: np.ndarray
    T_p: np.ndarray
    n_top: float
    fredholm: FredholmSolution = field(repr=False)
    dense: object = field(repr=False, default=None)
    shooting_residual: float = 0.0

    @property
    def flat(self):
        return self.params.V_c == 0.0

    def _n_tau_at(self, z):
        z = np.asarray(z, dtype=float)
        if self.dense is None:
            n = np.ones_like(z)
            tau = self.params.optical.kappa * (1.0 - z)
        else:
            y = self.dense(z)
            n, tau = y[0], y[1]
        tau = np.where(z >= 1.0, 0.0, tau)
        return n, tau

    def sample(self, z, n_mu=DEFAULT_N_MU) -> BaseSample:
        """Profiles and radiation at arbitrary heights (dense ODE output)."""
        z = np.asarray(z, dtype=float)
        n, tau = self._n_tau_at(z)
        tau = np.minimum.accumulate(np.maximum(tau, 0.0)) if tau[0] >= tau[-1] else tau
        p = self.params
        fld = assemble_radiation_field(p.optical, GridFunction(z, tau), self.fredholm,
                                       _polar_rule(n_mu))
        taxis = p.taxis
        M = taxis.response(fld.G)
        dM = taxis.derivative(fld.G)
        d2M = taxis.second_derivative(fld.G)
        kappa, mu0 = p.optical.kappa, p.optical.mu0
        dG_c = fld.G_c * kappa * n / mu0
        dG = -kappa * n * p.optical.I_t * self.fredholm.derivative(tau)
        return BaseSample(z=z, n_p=n, tau=tau, field=fld, dn_p=p.V_c * M * n, M=M, dM=dM,
                          d2M=d2M, dG=dG, dG_c=dG_c, q_p=fld.q_z)


def _polar_rule(n_mu):
    return polar_rule(n_mu // 2)


class _FastUpsilon:
    """Scalar cubic-spline evaluation of the total intensity (ODE hot path)."""

    def __init__(self, fred: FredholmSolution):
        sp = fred._spline
        self.x = sp.x
        self.c = sp.c
        self.h = self.x[1] - self.x[0]
        self.kappa = fred.kappa
        self.n = len(self.x) - 1

    def __call__(self, tau):
        if tau <= 0.0:
            tau = 0.0
        elif tau >= self.kappa:
            tau = self.kappa
        i = min(int(tau / self.h), self.n - 1)
        d = tau - self.x[i]
        c = self.c
        return ((c[0, i] * d + c[1, i]) * d + c[2, i]) * d + c[3, i]


def _shoot(params: SuspensionParams, ups: _FastUpsilon, n_top, z_eval=None, tol=1e-10):
    V_c = params.V_c
    kappa = params.optical.kappa
    I_t = params.optical.I_t
    taxis = params.taxis

    def rhs(z, y):
        n, tau = y
        m = taxis.scalar(I_t * ups(tau))
        return [V_c * m * n, -kappa * n]

    return integrate_ode(rhs, [n_top, 0.0], (1.0, 0.0), tol=tol, z_eval=z_eval, method="DOP853")


def solve_base_state(params: SuspensionParams, grid_size: int = DEFAULT_GRID,
                     fredholm: Optional[FredholmSolution] = None, tol=1e-10) -> BaseState:
    """Shoot on the top concentration until the optical depth at the bottom is kappa."""
    if grid_size < 64:
        raise ValueError("grid_size must be >= 64")
    opt = params.optical
    fred = fredholm if fredholm is not None else solve_fredholm(opt)
    kappa = opt.kappa
    z = np.linspace(0.0, 1.0, grid_size)
    if params.V_c == 0.0:
        n = np.ones_like(z)
        tau = kappa * (1.0 - z)
        return _assemble(params, fred, z, n, tau, 1.0, None, 0.0)

    ups = _FastUpsilon(fred)

    def residual(log_n):
        try:
            sol = _shoot(params, ups, math.exp(log_n), tol=tol)
        except StiffnessError as exc:
            raise ShootingError(f"integration failed while shooting: {exc}") from exc
        return sol.values[1, -1] - kappa

    # start from the cheap optical-depth estimate and double the bracket
    # half-width (in log n_top) until the residual changes sign
    floor, ceil = math.log(1e-6), math.log(1e3)
    try:
        centre = math.log(profile_by_optical_depth(params, fred, precise=False).n_top)
    except (BracketError, FloatingPointError, ValueError, ZeroDivisionError):
        centre = 0.0
    centre = min(max(centre, floor), ceil)
    width = 1e-4
    lo, hi = max(centre - width, floor), min(centre + width, ceil)
    r_lo, r_hi = residual(lo), residual(hi)
    while (r_lo > 0 and lo > floor) or (r_hi < 0 and hi < ceil):
        width *= 2.0
        if r_lo > 0 and lo > floor:
            lo = max(centre - width, floor)
            r_lo = residual(lo)
        if r_hi < 0 and hi < ceil:
            hi = min(centre + width, ceil)
            r_hi = residual(hi)
    if r_lo > 0 or r_hi < 0:
        raise ShootingError(f"no bracketing top concentration in [1e-6, 1e3] "
                            f"(residuals {r_lo:.3g}, {r_hi:.3g})", residual=min(abs(r_lo), abs(r_hi)))
    try:
        log_n = brent_root(residual, (lo, hi), tol=1e-14)
    except BracketError as exc:  # pragma: no cover
        raise ShootingError(str(exc)) from exc
    n_top = math.exp(log_n)
    sol = _shoot(params, ups, n_top, z_eval=z[::-1], tol=tol)
    n = sol.values[0, ::-1].copy()
    tau = sol.values[1, ::-1].copy()
    tau[-1] = 0.0
    res = float(tau[0] - kappa)
    if np.any(np.diff(tau) > 0):
        raise StiffnessError("optical depth is not monotone in z")
    return _assemble(params, fred, z, n, tau, n_top, sol.dense, res)


def _assemble(params, fred, z, n, tau, n_top, dense, res) -> BaseState:
    fld = assemble_radiation_field(params.optical, GridFunction(z, tau), fred)
    M, dM = taxis_eval(params.taxis, fld.G)
    return BaseState(params=params, z_grid=z, n_p=n, tau=tau, G_p=fld.G, G_p_c=fld.G_c,
                     G_p_d=fld.G_d, q_p=fld.q_z, M_p=M, dM_p=dM, T_p=1.0 - z, n_top=n_top,
                     fredholm=fred, dense=dense, shooting_residual=res)


@dataclass(frozen=True)
class Peak:
    z_max: float
    n_max: float
    flat: bool = False
    interior: bool = True


def base_peak_location(state: BaseState) -> Peak:
    """Height and value of the concentration maximum.

    An interior maximum is refined to the zero of dn/dz on the dense
    output, where the local intensity equals the critical one.
    """
    n = state.n_p
    if np.ptp(n) <= 1e-12 * np.max(n):
        return Peak(0.0, float(n[0]), flat=True, interior=False)
    i = int(np.argmax(n))
    z = state.z_grid
    if i == 0 or i == len(z) - 1 or state.dense is None:
        return Peak(float(z[i]), float(n[i]), interior=False)
    p = state.params

    def slope(zz):
        nn, tt = state._n_tau_at(np.array([zz]))
        return p.taxis.scalar(p.optical.I_t * float(state.fredholm(tt[0])))

    a, b = z[i - 1], z[i + 1]
    try:
        zm = brent_root(slope, (a, b), tol=1e-13)
    except BracketError:
        zm = float(z[i])
    nm = float(state._n_tau_at(np.array([zm]))[0][0])
    return Peak(zm, nm)


# --------------------------------------------------------------------------
# optical-depth parametrisation

@dataclass
class DepthProfile:
    tau: np.ndarray
    z: np.ndarray
    n: np.ndarray
    n_top: float


def profile_by_optical_depth(params: SuspensionParams, fred: Optional[FredholmSolution] = None,
                             precise: bool = True) -> DepthProfile:
    """Equilibrium profile from ``dn/dtau = -V_c M / kappa`` on a fine tau grid.

    Along tau the concentration is explicit, n(tau) = n_top - (V_c/kappa) F(tau)
    with F the running integral of M, and the height follows from
    dz/dtau = -1/(kappa n). Normalisation reduces to a scalar equation for
    n_top. An independent route to the shooting solution; ``precise`` solves
    that equation with adaptive quadrature instead of Simpson's rule.
    """
    opt = params.optical
    fred = fred if fred is not None else solve_fredholm(opt)
    kappa = opt.kappa
    tf = np.linspace(0.0, kappa, 4 * (len(fred.tau_grid) - 1) + 1)
    M = params.taxis.response(opt.I_t * fred(tf))
    F = scipy.interpolate.CubicSpline(tf, M).antiderivative()
    scale = params.V_c / kappa
    shape = scale * F(tf)

    if precise:
        def height_deficit(n_top):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.integrate.IntegrationWarning)
                val, _ = scipy.integrate.quad(lambda t: 1.0 / (n_top - scale * F(t)), 0.0, kappa,
                                              epsabs=1e-14, epsrel=1e-13, limit=400)
            return val / kappa - 1.0
    else:
        def height_deficit(n_top):
            return scipy.integrate.simpson(1.0 / (n_top - shape), x=tf) / kappa - 1.0

    lo = max(float(np.max(shape)), 0.0)
    lo_n = lo + 1e-9 * max(1.0, lo)
    hi = lo_n + 1.0
    while height_deficit(hi) > 0:
        hi *= 2.0
    n_top = brent_root(height_deficit, (lo_n, hi), tol=1e-15)
    n = n_top - shape
    z = 1.0 - scipy.integrate.cumulative_simpson(1.0 / n, x=tf, initial=0.0) / kappa
    return DepthProfile(tau=tf, z=z, n=n, n_top=n_top)


def calibrate_critical_intensity(params: SuspensionParams, z_target=0.5, theta_i=0.0) -> float:
    """Critical intensity that places the concentration peak at ``z_target``.

    The calibration is performed at incidence ``theta_i`` and then held fixed
    when other parameters change.
    """
    opt = replace(params.optical, theta_i=theta_i)
    fred = solve_fredholm(opt)
    g_lo = opt.I_t * float(fred(opt.kappa))
    g_hi = opt.I_t * float(fred(0.0))
    taxis = params.taxis

    def peak_height(G_c):
        p = replace(params, optical=opt, taxis=replace(taxis, G_c=G_c))
        prof = profile_by_optical_depth(p, fred, precise=False)
        return float(prof.z[int(np.argmax(prof.n))]) - z_target

    eps = 1e-6 * (g_hi - g_lo)
    return brent_root(peak_height, (g_lo + eps, g_hi - eps), tol=1e-10)


# --------------------------------------------------------------------------
# export

PROFILE_COLUMNS = ("z", "n_p", "tau", "G_c", "G_d", "G_total", "q_p", "M_p", "T_p")


def profile_rows(state: BaseState):
    for i in range(len(state.z_grid)):
        yield (state.z_grid[i], state.n_p[i], state.tau[i], state.G_p_c[i], state.G_p_d[i],
               state.G_p[i], state.q_p[i], state.M_p[i], state.T_p[i])


def write_profile_csv(state: BaseState, stream, header_lines=()):
    for line in header_lines:
        stream.write(f"# {line}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(PROFILE_COLUMNS)
    for row in profile_rows(state):
        w.writerow([f"{v:.17g}" for v in row])
