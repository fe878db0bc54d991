"""Coefficient profiles of the linearised cell-conservation equation.

Two equivalent forms are produced. The flux form keeps the perturbed
vertical cell flux F as an unknown,

    D Phi   = Theta
    D Theta = F + V_c M Theta + V_c n M' (c G_c Phi + G1d)
    D F     = (Le sigma + k^2) Theta - i k V_c n M A / q + Le Dn W

with c = kappa/mu0 (or kappa when the collimated cosine factor is dropped).
Eliminating F gives a third-order equation for Phi,

    D^3 Phi - a3 D^2 Phi - (a2 + Le sigma + k^2) D Phi - a1 Phi - a0[Theta, Phi] = Le Dn W

where a0 carries the diffuse-radiation moments.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..basestate import BaseSample, SuspensionParams
from ..errors import DiscretizationError
from ..radiative import (DEFAULT_N_MU, DEFAULT_N_PHI, MomentOperator,
                         perturbed_moment_operator)


def collimated_factor(params: SuspensionParams, collimated_cos_factor=True):
    opt = params.optical
    return opt.kappa / opt.mu0 if collimated_cos_factor else opt.kappa


@dataclass
class CellCoefficients:
    """Nodal coefficients of the flux form."""
    z: np.ndarray
    theta_theta: np.ndarray     # multiplies Theta in D Theta
    theta_phi: np.ndarray       # multiplies Phi in D Theta
    theta_g1d: np.ndarray       # multiplies G1d in D Theta
    flux_A: np.ndarray          # multiplies A in D F
    flux_W: np.ndarray          # multiplies W in D F (Le Dn)


def cell_coefficients(sample: BaseSample, params: SuspensionParams, k: float,
                      collimated_cos_factor=True) -> CellCoefficients:
    V_c = params.V_c
    c = collimated_factor(params, collimated_cos_factor)
    n, M, dM = sample.n_p, sample.M, sample.dM
    return CellCoefficients(
        z=sample.z,
        theta_theta=V_c * M,
        theta_phi=V_c * n * dM * c * sample.field.G_c,
        theta_g1d=V_c * n * dM,
        flux_A=-1j * k * V_c * n * M / sample.q_p,
        flux_W=params.Le * sample.dn_p,
    )


@dataclass
class AlephCoefficients:
    """Profiles a1, a2, a3 and the radiation operator a0 on a grid."""
    z: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    g1d_coef: np.ndarray        # a0 = g1d_coef G1d + dg1d_coef D G1d + A_coef A
    dg1d_coef: np.ndarray
    A_coef: np.ndarray
    moments: Optional[MomentOperator] = None

    def a0(self, theta, phi, diff=None, g1d=None, dg1d=None, A=None):
        """Apply a0 to (Theta, Phi).

        Radiation moments come from the stored operator unless given; the
        derivative of G1d uses the differentiation matrix ``diff``.
        """
        if g1d is None or A is None:
            if self.moments is None:
                raise DiscretizationError("radiation moments are required to apply a0")
            g1d_op, A_op = self.moments.apply(theta, phi)
            g1d = g1d_op if g1d is None else g1d
            A = A_op if A is None else A
        if dg1d is None:
            if diff is None:
                raise DiscretizationError("a differentiation matrix is needed for D G1d")
            dg1d = diff @ g1d
        return self.g1d_coef * g1d + self.dg1d_coef * dg1d + self.A_coef * A


def assemble_coefficients(base, params: SuspensionParams, z, k: float, moments=None,
                          n_mu=DEFAULT_N_MU, n_phi=DEFAULT_N_PHI, collimated_cos_factor=True,
                          sample: Optional[BaseSample] = None) -> AlephCoefficients:
    """Third-order-form coefficients from the equilibrium state on grid ``z``.

    ``moments`` may be a precomputed MomentOperator on the same grid; when
    omitted and the medium scatters it is built here.
    """
    z = np.asarray(z, dtype=float)
    s = sample if sample is not None else base.sample(z, n_mu=n_mu)
    V_c = params.V_c
    c = collimated_factor(params, collimated_cos_factor)
    n, M, dM, d2M = s.n_p, s.M, s.dM, s.d2M
    g = s.field.G_c
    dn, dG, dg = s.dn_p, s.dG, s.dG_c
    d_nM = dn * dM + n * d2M * dG
    a3 = V_c * M
    a2 = V_c * dM * dG + V_c * n * dM * c * g
    a1 = V_c * c * (d_nM * g + n * dM * dg)
    if params.optical.omega > 0.0:
        if moments is None:
            moments = perturbed_moment_operator(s, k, params.optical, n_mu, n_phi,
                                                collimated_cos_factor)
        elif len(moments.grid) != len(z) or np.max(np.abs(moments.grid - z)) > 1e-14:
            raise DiscretizationError("moment operator grid does not match the coefficient grid")
    return AlephCoefficients(z=z, a1=a1, a2=a2, a3=a3, g1d_coef=V_c * d_nM,
                             dg1d_coef=V_c * n * dM,
                             A_coef=-1j * k * V_c * n * M / s.q_p, moments=moments)


# --------------------------------------------------------------------------
# pointwise residuals of the two forms

def flux_form_residual(sample: BaseSample, params: SuspensionParams, k, sigma, phi_derivs, W,
                       g1d, dg1d, A, collimated_cos_factor=True):
    """Residual of D F - (Le sigma + k^2) Theta + ... with D F expanded by the product rule.

    ``phi_derivs`` holds Phi and its first three derivatives at the nodes.
    """
    P0, P1, P2, P3 = phi_derivs
    V_c, Le = params.V_c, params.Le
    c = collimated_factor(params, collimated_cos_factor)
    n, M, dM, d2M = sample.n_p, sample.M, sample.dM, sample.d2M
    g, dg, dn, dG = sample.field.G_c, sample.dG_c, sample.dn_p, sample.dG
    d_nM = dn * dM + n * d2M * dG
    # F = D Theta - V_c M Theta - V_c n M' (c g Phi + G1d)
    dF = (P3 - V_c * dM * dG * P1 - V_c * M * P2
          - V_c * d_nM * (c * g * P0 + g1d)
          - V_c * n * dM * (c * dg * P0 + c * g * P1 + dg1d))
    return (dF - (Le * sigma + k ** 2) * P1 + 1j * k * V_c * n * M * A / sample.q_p
            - Le * dn * W)


def aleph_form_residual(coef: AlephCoefficients, params: SuspensionParams, k, sigma, phi_derivs, W,
                        g1d, dg1d, A, dn):
    P0, P1, P2, P3 = phi_derivs
    a0 = coef.a0(P1, P0, g1d=g1d, dg1d=dg1d, A=A)
    return (P3 - coef.a3 * P2 - (coef.a2 + params.Le * sigma + k ** 2) * P1 - coef.a1 * P0 - a0
            - params.Le * dn * W)
