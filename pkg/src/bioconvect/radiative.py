"""Radiation field in an isotropically scattering algal layer.

The equilibrium field is split into the refracted collimated beam,
attenuated as ``exp(-tau/mu0)``, and a diffuse part. The total intensity
obeys a Fredholm equation of the second kind in optical depth ``tau``:

    Y(tau) = exp(-tau/mu0) + (omega/2) int_0^kappa Y(t) E1(|tau - t|) dt

Perturbations of the concentration perturb both parts; the diffuse one is
found from the discrete-ordinate form of the linearised transfer equation.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.interpolate
import scipy.linalg

from . import kernels
from .errors import ConvergenceError, DiscretizationError
from .numerics import (GridFunction, Quadrature, exp_integral, graded_double_gauss,
                       trapezoid_weights)

DEFAULT_N_REFRACT = 1.333
DEFAULT_FREDHOLM_NODES = 2049
DEFAULT_N_MU = 24
DEFAULT_N_PHI = 16


@dataclass(frozen=True)
class OpticalConfig:
    kappa: float
    omega: float
    theta_i: float = 0.0          # degrees
    I_t: float = 1.0
    n_refract: float = DEFAULT_N_REFRACT

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError("omega must lie in [0, 1]")
        if not 0.0 <= self.theta_i <= 80.0:
            raise ValueError("theta_i must lie in [0, 80] degrees")
        if not self.n_refract >= 1.0:
            raise ValueError("n_refract must be >= 1")
        if not self.I_t > 0:
            raise ValueError("I_t must be positive")

    @property
    def theta_0(self):
        return snell_refract(self.theta_i, self.n_refract)

    @property
    def mu0(self):
        return float(np.cos(self.theta_0))


def snell_refract(theta_i, n_refract=DEFAULT_N_REFRACT):
    """Refraction angle (radians) of a beam entering at ``theta_i`` degrees."""
    if not 0.0 <= theta_i < 90.0:
        raise ValueError("theta_i must lie in [0, 90) degrees")
    if n_refract < 1.0:
        raise ValueError("n_refract must be >= 1")
    return float(np.arcsin(np.sin(np.radians(theta_i)) / n_refract))


# --------------------------------------------------------------------------
# equilibrium: Fredholm equation for the scaled total intensity

def _kernel_moments(tau, kappa):
    """int_0^kappa E1(|tau-t|) dt and int_0^kappa (t-tau) E1(|tau-t|) dt."""
    def first_moment(a):
        return 0.5 - a * exp_integral(2, a) - exp_integral(3, a)
    k0 = 2.0 - exp_integral(2, tau) - exp_integral(2, kappa - tau)
    k1 = first_moment(kappa - tau) - first_moment(tau)
    return k0, k1


def _difference_matrix(n, h):
    D = np.zeros((n, n))
    idx = np.arange(1, n - 1)
    D[idx, idx - 1] = -0.5 / h
    D[idx, idx + 1] = 0.5 / h
    D[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
    D[-1, -3:] = np.array([1.0, -4.0, 3.0]) / (2 * h)
    return D


@dataclass
class FredholmSolution:
    tau_grid: np.ndarray
    upsilon: np.ndarray
    kappa: float
    omega: float
    mu0: float
    residual: float = 0.0
    _spline: object = field(default=None, repr=False)

    def __post_init__(self):
        self._spline = scipy.interpolate.CubicSpline(self.tau_grid, self.upsilon)

    def __call__(self, tau):
        """Cubic-spline evaluation; ``tau`` is clipped to [0, kappa]."""
        return self._spline(np.clip(tau, 0.0, self.kappa))

    def derivative(self, tau):
        return self._spline(np.clip(tau, 0.0, self.kappa), 1)

    def nystrom(self, tau):
        """Evaluate the Nystrom interpolant implied by the collocation rule.

        More accurate than the spline next to the faces, where the
        solution has a ``tau log tau`` component.
        """
        x = np.atleast_1d(np.asarray(tau, dtype=float))
        t = self.tau_grid
        if self.omega == 0.0:
            return np.exp(-x / self.mu0)
        h = t[1] - t[0]
        w = trapezoid_weights(t)
        du = _difference_matrix(len(t), h) @ self.upsilon
        dx = np.interp(x, t, du)
        d = np.abs(x[:, None] - t[None, :])
        hit = d == 0
        E = np.where(hit, 0.0, exp_integral(1, np.where(hit, 1.0, d).ravel()).reshape(d.shape))
        WE = E * w[None, :]
        k0, k1 = _kernel_moments(x, self.kappa)
        num = np.exp(-x / self.mu0) + 0.5 * self.omega * (
            WE @ self.upsilon + dx * (k1 - (WE * (t[None, :] - x[:, None])).sum(1)))
        den = 1.0 - 0.5 * self.omega * (k0 - WE.sum(1))
        return num / den


def solve_fredholm(config: OpticalConfig, n_nodes: int = DEFAULT_FREDHOLM_NODES) -> FredholmSolution:
    """Collocation solve of the equilibrium intensity equation on a uniform grid.

    The logarithmic kernel singularity is removed by subtracting the
    first-order Taylor expansion of the solution about each collocation
    point; the subtracted parts integrate in closed form through E2 and E3.
    The dense system is solved directly, which stays robust as omega -> 1.
    """
    if n_nodes < 16:
        raise ValueError("n_nodes must be >= 16")
    kappa, omega, mu0 = config.kappa, config.omega, config.mu0
    t = np.linspace(0.0, kappa, n_nodes)
    rhs = np.exp(-t / mu0)
    if omega == 0.0:
        return FredholmSolution(t, rhs, kappa, omega, mu0, 0.0)
    h = t[1] - t[0]
    w = trapezoid_weights(t)
    # E1(|i-j| h) is Toeplitz; the diagonal is excluded by the subtraction
    col = np.concatenate([[0.0], exp_integral(1, h * np.arange(1, n_nodes))])
    E = scipy.linalg.toeplitz(col)
    WE = E * w[None, :]
    k0, k1 = _kernel_moments(t, kappa)
    first = (WE * (t[None, :] - t[:, None])).sum(1)
    A = np.eye(n_nodes) - 0.5 * omega * WE
    A[np.diag_indices(n_nodes)] += 0.5 * omega * (WE.sum(1) - k0)
    A += 0.5 * omega * (first - k1)[:, None] * _difference_matrix(n_nodes, h)
    ups = np.linalg.solve(A, rhs)
    if not np.all(np.isfinite(ups)) or np.any(ups <= 0):
        raise ConvergenceError("Fredholm solve produced a non-positive intensity (internal error)")
    residual = float(np.max(np.abs(A @ ups - rhs)))
    return FredholmSolution(t, ups, kappa, omega, mu0, residual)


def base_diffuse_intensity(fred: FredholmSolution, mu, I_t=1.0):
    """Diffuse intensity I(tau, mu) on the Fredholm grid, shape (n_mu, n_tau).

    Formal solution of ``mu dI/dtau = I - S`` with ``S = omega I_t Y / 4 pi``
    and no diffuse light entering through either face.
    """
    mu = np.asarray(mu, dtype=float)
    t = fred.tau_grid
    S = fred.omega * I_t * fred.upsilon / (4 * np.pi)
    if fred.omega == 0.0:
        return np.zeros((len(mu), len(t)))
    dtau = np.diff(t)
    # in tau, upward directions (mu > 0) start at tau = kappa: sweep "downward"
    # in the node index, exactly like the z-sweep with dtau per cell
    h = dtau
    psi = kernels.sweep_apply(h, dtau, -mu, np.zeros_like(mu), np.tile(S, (len(mu), 1)))
    # the kernel scales the source by h/|mu| = dtau/|mu|, i.e. S per unit depth
    return psi.real


# --------------------------------------------------------------------------
# equilibrium field on a z-grid

def polar_rule(n_per_hemisphere) -> Quadrature:
    """Polar quadrature used for every angular moment."""
    return graded_double_gauss(n_per_hemisphere)


@dataclass
class RadiationField:
    z: np.ndarray
    tau: np.ndarray
    G_c: np.ndarray
    G_d: np.ndarray
    G: np.ndarray
    q_z: np.ndarray
    mu: np.ndarray
    mu_weights: np.ndarray
    intensity: np.ndarray         # diffuse I(z, mu), shape (n_mu, n_z)


def assemble_radiation_field(config: OpticalConfig, tau_of_z: GridFunction, upsilon: FredholmSolution,
                             quadrature: Optional[Quadrature] = None, tol=1e-10) -> RadiationField:
    """Collimated and diffuse intensities, total intensity and net flux on a z-grid."""
    z = tau_of_z.grid
    tau = np.asarray(tau_of_z.values, dtype=float)
    if np.any(np.diff(tau) > 1e-14) or abs(tau[-1]) > 1e-12:
        raise ValueError("tau(z) must decrease monotonically to tau(1) = 0")
    quad = quadrature or polar_rule(DEFAULT_N_MU // 2)
    I_t, mu0 = config.I_t, config.mu0
    G_c = I_t * np.exp(-tau / mu0)
    G = I_t * upsilon(tau)
    G_d = G - G_c
    if np.min(G_d) < -max(tol, 1e-8):
        raise DiscretizationError(f"negative diffuse intensity {np.min(G_d):.3g}: tau/upsilon inconsistent")
    G_d = np.maximum(G_d, 0.0)
    I_tau = base_diffuse_intensity(upsilon, quad.nodes, I_t)
    qd_tau = 2 * np.pi * (I_tau * quad.nodes[:, None]).T @ quad.weights
    t = upsilon.tau_grid
    tau_c = np.clip(tau, 0.0, upsilon.kappa)
    if upsilon.omega == 0.0:
        intensity = np.zeros((len(quad.nodes), len(z)))
        qd = np.zeros_like(z)
    else:
        intensity = scipy.interpolate.CubicSpline(t, I_tau, axis=1)(tau_c)
        qd = scipy.interpolate.CubicSpline(t, qd_tau)(tau_c)
    q_z = I_t * mu0 * np.exp(-tau / mu0) - qd
    return RadiationField(z=z, tau=tau, G_c=G_c, G_d=G_d, G=G, q_z=q_z, mu=quad.nodes,
                          mu_weights=quad.weights, intensity=intensity)


# --------------------------------------------------------------------------
# perturbed radiation

@dataclass
class PerturbedRadiation:
    grid: np.ndarray
    g1_c: np.ndarray
    g1_d: np.ndarray
    A: np.ndarray
    B: np.ndarray
    iterations: int = 0

    @property
    def g1(self):
        return self.g1_c + self.g1_d


@dataclass(frozen=True)
class Ordinates:
    mu: np.ndarray
    nu1: np.ndarray
    nu2: np.ndarray
    weights: np.ndarray      # sum to 4 pi
    mu_index: np.ndarray     # index into the polar rule


def product_ordinates(n_mu=DEFAULT_N_MU, n_phi=DEFAULT_N_PHI) -> Ordinates:
    """Polar rule crossed with a uniform azimuthal rule."""
    polar = polar_rule(n_mu // 2)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    mu = np.repeat(polar.nodes, n_phi)
    idx = np.repeat(np.arange(len(polar.nodes)), n_phi)
    ph = np.tile(phi, len(polar.nodes))
    st = np.sqrt(1.0 - mu ** 2)
    w = np.repeat(polar.weights, n_phi) * (2 * np.pi / n_phi)
    return Ordinates(mu=mu, nu1=st * np.cos(ph), nu2=st * np.sin(ph), weights=w, mu_index=idx)


def folded_ordinates(n_mu=DEFAULT_N_MU, n_phi=DEFAULT_N_PHI) -> Ordinates:
    """Product ordinates with the mirror pairs phi <-> -phi merged.

    Valid when the horizontal wavevector lies along x, where the pair
    solutions coincide; the nu2 moment then vanishes identically.
    """
    polar = polar_rule(n_mu // 2)
    half = n_phi // 2
    m = np.arange(half + 1)
    phi = 2 * np.pi * m / n_phi
    wphi = np.full(half + 1, 2 * 2 * np.pi / n_phi)
    wphi[0] = wphi[-1] = 2 * np.pi / n_phi
    mu = np.repeat(polar.nodes, half + 1)
    idx = np.repeat(np.arange(len(polar.nodes)), half + 1)
    ph = np.tile(phi, len(polar.nodes))
    st = np.sqrt(1.0 - mu ** 2)
    w = np.repeat(polar.weights, half + 1) * np.tile(wphi, len(polar.nodes))
    return Ordinates(mu=mu, nu1=st * np.cos(ph), nu2=np.zeros_like(mu), weights=w, mu_index=idx)


@dataclass
class LocalBase:
    """Equilibrium quantities sampled on the grid of a perturbation."""
    z: np.ndarray
    n_p: np.ndarray
    tau: np.ndarray
    field: RadiationField


def _cell_data(local: LocalBase):
    h = np.diff(local.z)
    dtau = -np.diff(local.tau)
    return h, np.maximum(dtau, 0.0)


def solve_perturbed_rte(base, Theta: GridFunction, Phi: GridFunction, k1: float, k2: float,
                        config: OpticalConfig, n_mu=DEFAULT_N_MU, n_phi=DEFAULT_N_PHI,
                        tol=1e-9, max_iter=200, collimated_cos_factor=True) -> PerturbedRadiation:
    """Perturbed collimated and diffuse intensities for a concentration mode.

    ``Theta`` is the concentration amplitude and ``Phi`` its integral from
    z = 1. The diffuse amplitude is found per ordinate by sweeping away from
    the face where no light enters, with source iteration on the scattered
    part until successive total diffuse intensities agree to ``tol``.
    ``base`` is a BaseState (or anything with ``sample(z) -> LocalBase``).
    """
    z = Theta.grid
    local = base.sample(z, n_mu=n_mu)
    theta = np.asarray(Theta.values, dtype=complex)
    phi = np.asarray(Phi(z), dtype=complex)
    kappa, omega = config.kappa, config.omega
    g_col = local.field.G_c
    factor = kappa / config.mu0 if collimated_cos_factor else kappa
    g1_c = g_col * factor * phi
    zeros = np.zeros_like(theta)
    if omega == 0.0:
        return PerturbedRadiation(z, g1_c, zeros, zeros.copy(), zeros.copy(), 0)
    ords = product_ordinates(n_mu, n_phi)
    h, dtau = _cell_data(local)
    kv = k1 * ords.nu1 + k2 * ords.nu2
    Id = local.field.intensity[ords.mu_index]
    beta = omega * kappa / (4 * np.pi)
    fixed = -kappa * theta[None, :] * Id
    g1_d = zeros.copy()
    change = np.inf
    for it in range(1, max_iter + 1):
        q_iso = beta * (local.n_p * (g1_c + g1_d) + local.field.G * theta)
        psi = kernels.sweep_apply(h, dtau, ords.mu, kv, q_iso[None, :] + fixed)
        new = ords.weights @ psi
        change = np.max(np.abs(new - g1_d))
        g1_d = new
        if change < tol:
            break
    else:
        raise ConvergenceError(f"source iteration did not converge in {max_iter} iterations "
                               f"(last change {change:.3g})", residual=change)
    A = (ords.weights * ords.nu1) @ psi
    B = (ords.weights * ords.nu2) @ psi
    return PerturbedRadiation(z, g1_c, g1_d, A, B, it)


@dataclass
class MomentOperator:
    """Linear maps (Theta, Phi) -> perturbed diffuse intensity and x-flux."""
    grid: np.ndarray
    G_theta: np.ndarray
    G_phi: np.ndarray
    A_theta: np.ndarray
    A_phi: np.ndarray

    def apply(self, theta, phi):
        return (self.G_theta @ theta + self.G_phi @ phi,
                self.A_theta @ theta + self.A_phi @ phi)


def perturbed_moment_operator(local: LocalBase, k: float, config: OpticalConfig,
                              n_mu=DEFAULT_N_MU, n_phi=DEFAULT_N_PHI,
                              collimated_cos_factor=True, use_numba=None) -> MomentOperator:
    """Dense matrices of the diffuse response for wavevector (k, 0).

    The scattering coupling is eliminated exactly rather than iterated, so
    applying the operator equals the converged source iteration.
    """
    n = len(local.z)
    if config.omega == 0.0:
        zero = np.zeros((n, n), dtype=complex)
        return MomentOperator(local.z, zero, zero.copy(), zero.copy(), zero.copy())
    ords = folded_ordinates(n_mu, n_phi)
    h, dtau = _cell_data(local)
    Id = local.field.intensity[ords.mu_index]
    K0, K1, KA0, KA1 = kernels.sweep_moments(h, dtau, ords.mu, k * ords.nu1, Id, ords.weights,
                                             ords.weights * ords.nu1, use_numba=use_numba)
    kappa = config.kappa
    beta = config.omega * kappa / (4 * np.pi)
    factor = kappa / config.mu0 if collimated_cos_factor else kappa
    n_p = local.n_p
    c_col = local.field.G_c * factor
    M = np.eye(n) - beta * K0 * n_p[None, :]
    rhs_theta = beta * K0 * local.field.G[None, :] - kappa * K1
    rhs_phi = beta * K0 * (n_p * c_col)[None, :]
    sol = np.linalg.solve(M, np.hstack([rhs_theta, rhs_phi]))
    G_theta, G_phi = sol[:, :n], sol[:, n:]
    A_theta = beta * KA0 @ (n_p[:, None] * G_theta) + beta * KA0 * local.field.G[None, :] - kappa * KA1
    A_phi = beta * KA0 @ (n_p[:, None] * G_phi) + beta * KA0 * (n_p * c_col)[None, :]
    return MomentOperator(local.z, G_theta, G_phi, A_theta, A_phi)
