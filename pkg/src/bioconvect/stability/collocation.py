"""Chebyshev collocation of the stationary problem in the third-order form.

An independent discretisation used to cross-check the box-scheme solver:
unknowns (W, Phi, T) at Gauss-Lobatto points, Theta = D Phi eliminated,
the radiation coupling entering as a dense block. The targeted Rayleigh
number is a generalised eigenvalue of the resulting matrix pencil.
"""
from dataclasses import dataclass

import numpy as np
import scipy.interpolate
import scipy.linalg

from ..radiative import perturbed_moment_operator
from .coefficients import assemble_coefficients, collimated_factor
from .types import StabilityConfig


def chebyshev_grid(n):
    """Gauss-Lobatto points on [0, 1] (increasing) and the differentiation matrix."""
    j = np.arange(n + 1)
    x = np.cos(np.pi * j / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    X = np.tile(x, (n + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    # map x in [1, -1] to z = (1 - x)/2 in [0, 1]
    return (1.0 - x) / 2.0, -2.0 * D


def barycentric_matrix(nodes, targets):
    """Polynomial interpolation from Gauss-Lobatto ``nodes`` to ``targets``."""
    n = len(nodes) - 1
    w = np.ones(n + 1)
    w[0] = w[-1] = 0.5
    w *= (-1.0) ** np.arange(n + 1)
    diff = targets[:, None] - nodes[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-15)
    diff = np.where(exact, 1.0, diff)
    P = w[None, :] / diff
    P /= P.sum(axis=1, keepdims=True)
    rows = np.any(exact, axis=1)
    P[rows] = exact[rows].astype(float)
    return P


def _spline_matrices(fine, targets):
    eye = np.eye(len(fine))
    sp = scipy.interpolate.CubicSpline(fine, eye, axis=0)
    return sp(targets), sp(targets, 1)


@dataclass
class CollocationPencil:
    z: np.ndarray
    D: np.ndarray
    A0: np.ndarray
    B: np.ndarray       # A0 x = R B x

    def eigenvalues(self):
        vals = scipy.linalg.eigvals(self.A0, self.B)
        return vals[np.isfinite(vals)]


def build_collocation_pencil(base, config: StabilityConfig, k: float, n_cheb=48,
                             fine_grid=257) -> CollocationPencil:
    p = config.params
    z, D = chebyshev_grid(n_cheb)
    n = n_cheb + 1
    I = np.eye(n)
    D2, D3 = D @ D, D @ D @ D
    D4 = D2 @ D2
    sample = base.sample(z, n_mu=config.n_mu)
    coef = assemble_coefficients(base, p, z, k, moments=_NoMoments(z), n_mu=config.n_mu,
                                 n_phi=config.n_phi,
                                 collimated_cos_factor=config.collimated_cos_factor, sample=sample)
    # radiation block: solve on a fine uniform grid, interpolate both ways
    Gr = np.zeros((n, n), dtype=complex)   # G1d from Phi
    dGr = np.zeros((n, n), dtype=complex)
    Ar = np.zeros((n, n), dtype=complex)
    if p.optical.omega > 0.0 and p.V_c != 0.0:
        zf = np.linspace(0.0, 1.0, fine_grid)
        local = base.sample(zf, n_mu=config.n_mu)
        mop = perturbed_moment_operator(local, k, p.optical, config.n_mu, config.n_phi,
                                        config.collimated_cos_factor)
        P = barycentric_matrix(z, zf)
        S, Sd = _spline_matrices(zf, z)
        g_fine = mop.G_theta @ P @ D + mop.G_phi @ P
        a_fine = mop.A_theta @ P @ D + mop.A_phi @ P
        Gr, dGr, Ar = S @ g_fine, Sd @ g_fine, S @ a_fine

    k2 = k * k
    Z = np.zeros((n, n), dtype=complex)
    # momentum: D^4 W - 2k^2 D^2 W + k^4 W + R_b k^2 D Phi - R_T k^2 T = 0
    mw_w = D4 - 2 * k2 * D2 + k2 * k2 * I
    if config.eigen_target == "R_b":
        mw_phi, mw_t = Z.copy(), -p.R_T * k2 * I
        bw_phi, bw_t = -k2 * D, Z.copy()
    else:
        mw_phi, mw_t = p.R_b * k2 * D, Z.copy()
        bw_phi, bw_t = Z.copy(), k2 * I
    # cells: D^3 Phi - a3 D^2 Phi - (a2 + k^2) D Phi - a1 Phi - a0 - Le Dn W = 0
    diag = np.diag
    a0_phi = (diag(coef.g1d_coef) @ Gr + diag(coef.dg1d_coef) @ dGr + diag(coef.A_coef) @ Ar)
    mc_phi = D3 - diag(coef.a3) @ D2 - diag(coef.a2 + k2) @ D - diag(coef.a1) - a0_phi
    mc_w = -diag(p.Le * sample.dn_p)
    # temperature: D^2 T - k^2 T + W = 0
    mt_t = D2 - k2 * I
    mt_w = I.astype(complex)

    A0 = np.block([[mw_w, mw_phi, mw_t], [mc_w, mc_phi, Z], [mt_w, Z, mt_t]]).astype(complex)
    B = np.block([[Z, bw_phi, bw_t], [Z, Z, Z], [Z, Z, Z]]).astype(complex)

    # boundary rows replace collocation rows next to the walls
    V_c = p.V_c
    c = collimated_factor(p, config.collimated_cos_factor)
    flux = (D2 - diag(V_c * sample.M) @ D
            - diag(V_c * sample.n_p * sample.dM * c * sample.field.G_c)
            - diag(V_c * sample.n_p * sample.dM) @ Gr)

    def put(row, block_rows):
        A0[row] = 0.0
        B[row] = 0.0
        for col_block, vec in block_rows:
            A0[row, col_block * n:(col_block + 1) * n] = vec

    wall_cond = {"rigid": D, "stress_free": D2}
    put(0, [(0, I[0])])
    put(n - 1, [(0, I[n - 1])])
    put(1, [(0, wall_cond[p.bottom][0])])
    put(n - 2, [(0, wall_cond[p.top][n - 1])])
    put(n + 0, [(1, flux[0])])
    put(n + n - 1, [(1, flux[n - 1])])
    put(n + n - 2, [(1, I[n - 1])])
    put(2 * n, [(2, I[0])])
    put(3 * n - 1, [(2, I[n - 1])])
    return CollocationPencil(z=z, D=D, A0=A0, B=B)


class _NoMoments:
    """Placeholder moments: the collocation oracle applies its own block."""

    def __init__(self, z):
        self.grid = z

    def apply(self, theta, phi):  # pragma: no cover - never used
        raise RuntimeError("collocation assembles the radiation block itself")


def collocation_stationary_R(base, config: StabilityConfig, k: float, n_cheb=48, fine_grid=257,
                             near=None):
    """Smallest positive real stationary eigenvalue (or the one nearest ``near``)."""
    pencil = build_collocation_pencil(base, config, k, n_cheb, fine_grid)
    vals = pencil.eigenvalues()
    real = vals[(np.abs(vals.imag) <= 1e-6 * np.maximum(1.0, np.abs(vals.real))) & (vals.real > 0)]
    if real.size == 0:
        return None
    real = np.sort(real.real)
    if near is not None:
        return float(real[np.argmin(np.abs(real - near))])
    return float(real[0])
