import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bioconvect.errors import BracketError, DomainError, SingularMatrixError, StiffnessError
from bioconvect.numerics import (GridFunction, brent_root, cumulative_trapezoid, double_gauss,
                                 exp_integral, gauss_legendre, graded_double_gauss,
                                 integrate_ode, solve_dense_complex, trapezoid_weights)


# ---------------------------------------------------------------- E_n

def test_en_at_zero():
    assert exp_integral(2, 0.0) == 1.0
    assert exp_integral(3, 0.0) == 0.5


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("x", [1e-6, 0.01, 0.3, 1.0, 1.0000001, 2.5, 10.0, 40.0])
def test_en_matches_mpmath(n, x):
    ref = float(mpmath.expint(n, x))
    assert abs(exp_integral(n, x) - ref) <= 1e-12 * abs(ref)


def test_en_recurrence_on_log_grid():
    x = np.logspace(-6, 1.5, 400)
    for n in (1, 2):
        lhs = exp_integral(n + 1, x)
        rhs = (np.exp(-x) - x * exp_integral(n, x)) / n
        assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_en_monotone_decreasing():
    x = np.linspace(1e-4, 20, 2000)
    for n in (1, 2, 3):
        assert np.all(np.diff(exp_integral(n, x)) < 0)


def test_en_domain_errors():
    with pytest.raises(DomainError):
        exp_integral(1, 0.0)
    with pytest.raises(DomainError):
        exp_integral(2, -1.0)
    with pytest.raises(DomainError):
        exp_integral(4, 1.0)


def test_en_scalar_in_scalar_out():
    assert np.ndim(exp_integral(1, 0.5)) == 0
    assert exp_integral(1, np.array([0.5, 1.0])).shape == (2,)


# ---------------------------------------------------------------- quadrature

def test_gauss_small_rules():
    q1 = gauss_legendre(1, -1, 1)
    assert np.allclose(q1.nodes, [0.0]) and np.allclose(q1.weights, [2.0])
    q2 = gauss_legendre(2, -1, 1)
    assert np.allclose(q2.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
    assert np.allclose(q2.weights, [1.0, 1.0])


def test_gauss_x5_on_unit_interval():
    q = gauss_legendre(16, 0, 1)
    assert abs(q.integrate(q.nodes ** 5) - 1 / 6) < 1e-14


@pytest.mark.parametrize("n", [1, 2, 5, 12, 24])
def test_gauss_exact_to_degree(n):
    q = gauss_legendre(n, -0.5, 2.0)
    for d in range(2 * n):
        exact = (2.0 ** (d + 1) - (-0.5) ** (d + 1)) / (d + 1)
        got = q.integrate(q.nodes ** d)
        assert abs(got - exact) <= 1e-13 * max(1.0, abs(exact))


def test_gauss_nodes_interior_and_increasing():
    q = gauss_legendre(20, 0, 1)
    assert np.all(np.diff(q.nodes) > 0)
    assert q.nodes[0] > 0 and q.nodes[-1] < 1
    assert np.all(q.weights > 0)


def test_gauss_rejects_bad_input():
    with pytest.raises(ValueError):
        gauss_legendre(0)
    with pytest.raises(ValueError):
        gauss_legendre(3, 1.0, 1.0)


@pytest.mark.parametrize("rule", [double_gauss, graded_double_gauss])
def test_polar_rules_on_sphere(rule):
    q = rule(12)
    assert abs(q.weights.sum() - 2.0) < 1e-14
    assert np.all(np.diff(q.nodes) > 0)
    # hemispheric moments of mu
    up = q.nodes > 0
    assert abs(q.weights[up] @ q.nodes[up] - 0.5) < 1e-13
    assert abs(q.weights @ q.nodes ** 2 - 2 / 3) < 1e-13


@pytest.mark.parametrize("t", [0.05, 0.2])
def test_graded_rule_handles_grazing_exponential(t):
    # int_0^1 exp(-t/mu) dmu = E2(t) has a boundary layer at small mu
    ref = float(mpmath.expint(2, t))
    errs = []
    for rule in (graded_double_gauss, double_gauss):
        q = rule(12)
        up = q.nodes > 0
        errs.append(abs(q.weights[up] @ np.exp(-t / q.nodes[up]) - ref))
    assert errs[0] < 1e-5
    assert errs[0] < 0.05 * errs[1]


def test_trapezoid_helpers():
    x = np.linspace(0, 2, 101)
    assert abs(trapezoid_weights(x) @ x - 2.0) < 1e-14
    c = cumulative_trapezoid(2 * x, x)
    assert c[0] == 0 and abs(c[-1] - 4.0) < 1e-3


def test_grid_function_validation():
    g = GridFunction(np.array([0.0, 0.5, 1.0]), np.array([1.0, 2.0, 3.0]))
    assert g(0.25) == pytest.approx(1.5)
    gc = GridFunction(np.array([0.0, 1.0]), np.array([0.0, 2j]))
    assert gc(0.5) == pytest.approx(1j)
    with pytest.raises(ValueError):
        GridFunction(np.array([0.0, 0.9]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        GridFunction(np.array([0.0, 0.6, 0.5, 1.0]), np.zeros(4))
    with pytest.raises(ValueError):
        GridFunction(np.array([0.0, 1.0]), np.zeros(3))


# ---------------------------------------------------------------- ODE

def test_ode_constant():
    r = integrate_ode(lambda z, y: np.zeros_like(y), [1.0], (0.0, 1.0), z_eval=[0, 0.5, 1.0])
    assert np.all(r.values == 1.0)


def test_ode_exponential():
    r = integrate_ode(lambda z, y: y, [1.0], (0.0, 1.0), tol=1e-11)
    assert abs(r.values[0, -1] - math.e) < 1e-9


def test_ode_backward_attenuation():
    nu3 = math.cos(3 * math.pi / 4)
    r = integrate_ode(lambda z, y: -y / nu3, [1.0], (1.0, 0.0), tol=1e-11)
    assert r.grid[-1] == 0.0
    assert abs(r.values[0, -1] - math.exp(1.0 / nu3)) < 1e-9
    assert abs(r.values[0, -1] - math.exp(-math.sqrt(2))) < 1e-9


def test_ode_error_decreases_with_tol():
    errs = []
    for tol in (1e-4, 1e-6, 1e-8, 1e-10):
        r = integrate_ode(lambda z, y: -2 * z * y, [1.0], (0.0, 2.0), tol=tol)
        errs.append(abs(r.values[0, -1] - math.exp(-4.0)))
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_ode_dense_output():
    r = integrate_ode(lambda z, y: y, [1.0], (0.0, 1.0), tol=1e-11)
    assert abs(r.dense(0.3)[0] - math.exp(0.3)) < 1e-8


def test_ode_stiffness_error_reports_z():
    with pytest.raises(StiffnessError) as err:
        integrate_ode(lambda z, y: y ** 2, [1.0], (0.0, 2.0))
    assert err.value.z is not None and 0.9 < err.value.z <= 1.0


# ---------------------------------------------------------------- roots

def test_brent_linear_and_sqrt2():
    assert brent_root(lambda x: x - 0.5, (0, 1)) == pytest.approx(0.5, abs=1e-14)
    assert abs(brent_root(lambda x: x * x - 2, (1, 2)) - math.sqrt(2)) < 1e-12


def test_brent_no_sign_change():
    with pytest.raises(BracketError):
        brent_root(lambda x: x * x + 1, (-1, 1))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95))
def test_brent_root_in_bracket(c):
    r = brent_root(lambda x: math.tanh(5 * (x - c)), (0.0, 1.0))
    assert 0 <= r <= 1 and abs(r - c) < 1e-11


# ---------------------------------------------------------------- dense solve

def test_dense_identity_and_2x2():
    b = np.array([1 + 2j, -3j, 4.0])
    assert np.allclose(solve_dense_complex(np.eye(3), b), b)
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    x = solve_dense_complex(A, np.array([3.0, 5.0]))
    assert np.allclose(x, [0.8, 1.4], atol=1e-15)


def test_dense_random_residual():
    rng = np.random.default_rng(7)
    A = rng.standard_normal((50, 50)) + 1j * rng.standard_normal((50, 50))
    b = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    x = solve_dense_complex(A, b)
    assert np.linalg.norm(A @ x - b) < 1e-10


def test_dense_singular():
    with pytest.raises(SingularMatrixError):
        solve_dense_complex(np.array([[1.0, 2.0], [2.0, 4.0]]), np.array([1.0, 1.0]))
    with pytest.raises(SingularMatrixError):
        solve_dense_complex(np.array([[1.0, 1.0], [1.0, 1.0 + 1e-17]]), np.ones(2))
