import math
import warnings

import numpy as np
import pytest

from bioconvect.basestate import SuspensionParams, base_peak_location, solve_base_state
from bioconvect.errors import DiscretizationError
from bioconvect.radiative import OpticalConfig
from bioconvect.stability import (AlephCoefficients, RangeWarning, StabilityConfig,
                                  assemble_coefficients, count_vertical_modes, find_critical,
                                  leading_growth_rate, solve_marginal_point, trace_neutral_curve)
from bioconvect.stability import nrk
from bioconvect.stability.coefficients import aleph_form_residual, flux_form_residual
from bioconvect.stability.collocation import collocation_stationary_R
from bioconvect.stability.neutral import base_for

from conftest import reference_params

CLASSICAL_FF = 27 * math.pi ** 4 / 4


def classical(top="stress_free", bottom="stress_free", **kw):
    p = SuspensionParams(optical=OpticalConfig(1.0, 0.4), V_c=0.0, R_b=0.0, top=top, bottom=bottom)
    return StabilityConfig(params=p, eigen_target="R_T", **kw)


def reference_config(theta_i=0.0, **kw):
    return StabilityConfig(params=reference_params(theta_i=theta_i), **kw)


# ---------------------------------------------------------------- coefficients

@pytest.fixture(scope="module")
def sample40():
    p = reference_params(theta_i=40.0)
    base = solve_base_state(p)
    z = np.linspace(0, 1, 41)
    return p, base, base.sample(z)


def test_aleph_form_matches_flux_form(sample40):
    p, base, s = sample40
    rng = np.random.default_rng(11)
    z = s.z
    c = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    # Phi = sum c_j z^j with exact derivatives
    powers = np.arange(6)
    P0 = sum(c[j] * z ** j for j in powers)
    P1 = sum(j * c[j] * z ** max(j - 1, 0) for j in powers)
    P2 = sum(j * (j - 1) * c[j] * z ** max(j - 2, 0) for j in powers)
    P3 = sum(j * (j - 1) * (j - 2) * c[j] * z ** max(j - 3, 0) for j in powers)
    W = rng.standard_normal(len(z)) + 1j * rng.standard_normal(len(z))
    g1d, dg1d, A = (rng.standard_normal(len(z)) + 1j * rng.standard_normal(len(z)) for _ in range(3))
    k, sigma = 2.3, 0.4 + 1.1j
    coef = assemble_coefficients(base, p, z, k, sample=s)
    r_flux = flux_form_residual(s, p, k, sigma, (P0, P1, P2, P3), W, g1d, dg1d, A)
    r_aleph = aleph_form_residual(coef, p, k, sigma, (P0, P1, P2, P3), W, g1d, dg1d, A, s.dn_p)
    scale = np.max(np.abs(r_flux))
    assert np.max(np.abs(r_flux - r_aleph)) < 1e-10 * max(scale, 1.0)


def test_aleph_non_scattering_has_no_moments():
    p = reference_params(omega=0.0, theta_i=20.0)
    base = solve_base_state(p)
    z = np.linspace(0, 1, 33)
    coef = assemble_coefficients(base, p, z, 2.0)
    assert coef.moments is None
    with pytest.raises(DiscretizationError):
        coef.a0(np.ones(33), np.ones(33))
    zero = np.zeros(33)
    out = coef.a0(np.ones(33), np.ones(33), g1d=zero, dg1d=zero, A=zero)
    assert np.all(out == 0)


def test_aleph_vanishes_without_swimming():
    p = SuspensionParams(optical=OpticalConfig(1.0, 0.4), V_c=0.0)
    base = solve_base_state(p)
    z = np.linspace(0, 1, 33)
    coef = assemble_coefficients(base, p, z, 2.0)
    for arr in (coef.a1, coef.a2, coef.a3, coef.g1d_coef, coef.dg1d_coef, coef.A_coef):
        assert np.all(arr == 0)


def test_aleph_a3_is_swimming_response(sample40):
    p, base, s = sample40
    coef = assemble_coefficients(base, p, s.z, 2.0, sample=s)
    assert np.array_equal(coef.a3, p.V_c * s.M)


def test_moment_grid_mismatch(sample40):
    p, base, s = sample40
    other = assemble_coefficients(base, p, np.linspace(0, 1, 21), 2.0)
    with pytest.raises(DiscretizationError):
        assemble_coefficients(base, p, s.z, 2.0, moments=other.moments, sample=s)


def test_missing_moments_raise():
    coef = AlephCoefficients(z=np.linspace(0, 1, 5), a1=np.zeros(5), a2=np.zeros(5), a3=np.zeros(5),
                             g1d_coef=np.ones(5), dg1d_coef=np.ones(5), A_coef=np.ones(5))
    with pytest.raises(DiscretizationError):
        coef.a0(np.ones(5), np.ones(5))


# ---------------------------------------------------------------- classical limit

def test_classical_free_free_point():
    cfg = classical(n_grid=256)
    sol = solve_marginal_point(math.pi / math.sqrt(2), cfg)
    assert sol.R == pytest.approx(CLASSICAL_FF, rel=1e-3)
    assert sol.sigma == 0
    assert count_vertical_modes(sol) == 1


def test_classical_free_free_critical():
    cfg = classical(n_grid=128, k_range=(1.5, 3.0), n_k=7)
    cp = find_critical(cfg)
    assert cp.R_c == pytest.approx(CLASSICAL_FF, rel=1e-3)
    assert cp.k_c == pytest.approx(math.pi / math.sqrt(2), rel=1e-2)
    assert not cp.oscillatory and not cp.boundary_minimum


def test_rigid_free_classical_against_collocation():
    cfg = classical(top="stress_free", bottom="rigid", n_grid=256)
    base = base_for(cfg)
    box = solve_marginal_point(2.68, cfg).R
    col = collocation_stationary_R(base, cfg, 2.68, n_cheb=32)
    assert col == pytest.approx(1100.65, rel=1e-4)
    assert box == pytest.approx(col, rel=5e-3)


def test_no_oscillatory_branch_without_swimming():
    curve = trace_neutral_curve(classical(n_grid=64, k_range=(1.0, 4.0), n_k=6))
    assert not curve.has_oscillatory
    assert curve.bifurcation_k is None
    assert all(p.im_sigma == 0 for p in curve.points)
    assert [p.k for p in curve.points] == sorted(p.k for p in curve.points)


def test_range_warning_at_boundary():
    cfg = classical(n_grid=64, k_range=(3.0, 5.0), n_k=4)
    with pytest.warns(RangeWarning):
        cp = find_critical(cfg)
    assert cp.boundary_minimum and cp.k_c == 3.0


# ---------------------------------------------------------------- bioconvective eigen-solutions

@pytest.fixture(scope="module")
def cfg0():
    return reference_config(0.0, n_grid=96)


@pytest.fixture(scope="module")
def sol0(cfg0):
    return solve_marginal_point(2.0, cfg0)


def test_marginal_growth_rate_vanishes(cfg0, sol0):
    sigma = leading_growth_rate(cfg0, 2.0, sol0.R)
    assert abs(sigma.real) < 1e-6


def test_boundary_conditions(cfg0, sol0):
    Y = sol0.state.reshape(len(sol0.z), nrk.NCOMP)
    norm = np.max(np.abs(Y))
    bottom = [nrk.IW0, nrk.IW1, nrk.IF, nrk.IT0]
    top = [nrk.IW0, nrk.IW1, nrk.IF, nrk.IPHI, nrk.IT0]
    for c in bottom:
        assert abs(Y[0, c]) < 1e-8 * norm
    for c in top:
        assert abs(Y[-1, c]) < 1e-8 * norm
    assert Y[0, nrk.IW3] == pytest.approx(1.0, abs=1e-12)


def test_theta_is_phi_derivative(sol0):
    h = np.diff(sol0.z)
    lhs = np.diff(sol0.Phi)
    rhs = 0.5 * h * (sol0.Theta[1:] + sol0.Theta[:-1])
    assert np.max(np.abs(lhs - rhs)) < 1e-10 * np.max(np.abs(sol0.Theta))


def test_scale_invariance(cfg0, sol0):
    base = base_for(cfg0)
    system = nrk.build_box_system(base, cfg0, 2.0)
    R, y, _, _ = nrk.newton_eigen(system, sol0.R, 3.7 * sol0.state)
    assert abs(R - sol0.R) < 1e-10 * sol0.R
    assert np.max(np.abs(y - sol0.state)) < 1e-8 * np.max(np.abs(y))
    scaled = sol0.scaled(-2.5)
    assert np.allclose(scaled.W, -2.5 * sol0.W) and np.allclose(scaled.T, -2.5 * sol0.T)
    assert count_vertical_modes(scaled) == count_vertical_modes(sol0)
    again = nrk.solve_stationary(system, scaled)
    assert abs(again.R - sol0.R) < 1e-10 * sol0.R


def test_fundamental_mode(sol0):
    assert count_vertical_modes(sol0) == 1


def test_mode_count_synthetic():
    z = np.linspace(0, 1, 129)
    assert count_vertical_modes(np.sin(np.pi * z)) == 1
    assert count_vertical_modes(np.sin(2 * np.pi * z)) == 2
    assert count_vertical_modes(1j * np.sin(3 * np.pi * z)) == 3


def test_box_matches_collocation():
    cfg = reference_config(0.0, n_grid=256, n_mu=24, n_phi=16)
    box = solve_marginal_point(2.0, cfg).R
    col = collocation_stationary_R(base_for(cfg), cfg, 2.0, n_cheb=96)
    assert abs(box / col - 1) < 1e-3


def test_grid_convergence(cfg0):
    R = [solve_marginal_point(2.0, cfg0.with_(n_grid=n)).R for n in (128, 256)]
    assert abs(R[1] / R[0] - 1) < 1e-3


def test_numba_and_numpy_systems_agree(cfg0):
    base = base_for(cfg0)
    a = nrk.build_box_system(base, cfg0, 2.5, use_numba=True)
    b = nrk.build_box_system(base, cfg0, 2.5, use_numba=False)
    d = abs(a.A0 - b.A0).max()
    assert d < 1e-12 * abs(b.A0).max()


def test_oscillatory_solution_at_oblique_incidence():
    cfg = reference_config(40.0, n_grid=64)
    sol = solve_marginal_point(3.0, cfg, branch="oscillatory")
    assert abs(sol.sigma.imag) > 0 and sol.sigma.real == 0
    assert abs(np.imag(sol.R)) < 1e-8 * abs(sol.R)
    sigma = leading_growth_rate(cfg, 3.0, float(np.real(sol.R)))
    assert abs(sigma.real) < 1e-6
    assert abs(abs(sigma.imag) - abs(sol.sigma.imag)) < 1e-6 * max(1.0, abs(sol.sigma.imag))


def test_stability_config_validation():
    p = reference_params()
    for bad in (dict(k_range=(0.0, 2.0)), dict(k_range=(1.0, 25.0)), dict(branch_count=0),
                dict(eigen_target="Le"), dict(momentum_sigma="other"), dict(n_grid=4)):
        with pytest.raises(ValueError):
            StabilityConfig(params=p, **bad)
    with pytest.raises(ValueError):
        solve_marginal_point(-1.0, StabilityConfig(params=p))


def test_trace_independent_of_chunking():
    cfg = classical(n_grid=48, k_range=(1.0, 4.0), n_k=6)
    a = trace_neutral_curve(cfg.with_(chunk_size=2))
    b = trace_neutral_curve(cfg.with_(chunk_size=8))
    assert [(p.k, p.R) for p in a.points] == [(p.k, p.R) for p in b.points]


def test_base_peak_used_by_stability_is_calibrated():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        base = base_for(reference_config(0.0))
    assert base_peak_location(base).z_max == pytest.approx(0.5, abs=2e-3)
