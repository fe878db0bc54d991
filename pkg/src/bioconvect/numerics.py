"""Shared numerical kernels: exponential integrals, quadrature, ODE
integration, scalar root finding and dense complex solves."""
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.optimize

from .errors import BracketError, DomainError, SingularMatrixError, StiffnessError

EULER_GAMMA = 0.57721566490153286061


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values):
        """Apply the rule along the last axis of ``values``."""
        return np.asarray(values) @ self.weights

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True)
class GridFunction:
    """Samples of a real or complex function on an increasing grid in [0, 1]."""
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values)
        if grid.ndim != 1 or len(grid) < 2:
            raise ValueError("grid must be a 1-D array with at least two points")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if grid[0] != 0.0 or grid[-1] != 1.0:
            raise ValueError("grid endpoints must be exactly 0 and 1")
        if values.shape[-1] != len(grid):
            raise ValueError("values length must equal grid length")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __call__(self, z):
        if np.iscomplexobj(self.values):
            return (np.interp(z, self.grid, self.values.real)
                    + 1j * np.interp(z, self.grid, self.values.imag))
        return np.interp(z, self.grid, self.values)


# --------------------------------------------------------------------------
# exponential integrals

def _e1_series(x):
    # valid (and used) for 0 < x <= 1
    total = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, 51):
        term = -term * x / k
        total = total - term / k
    return -EULER_GAMMA - np.log(x) + total


def _en_continued_fraction(n, x):
    # modified Lentz evaluation of the continued fraction, valid for x > 1
    tiny = 1e-300
    b = x + n
    c = np.full_like(x, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, 400):
        an = -i * (n - 1 + i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 1e-16):
            break
    return h * np.exp(-x)


def exp_integral(n, x):
    """Exponential integral E_n(x) for n in {1, 2, 3} and x >= 0.

    Uses the power series of E_1 with upward recurrence for x <= 1 and a
    continued fraction for x > 1. Scalars in, scalars out.
    """
    if n not in (1, 2, 3):
        raise DomainError(f"order n={n} not supported (only 1, 2, 3)")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError("exp_integral requires x >= 0")
    if n == 1 and np.any(x == 0):
        raise DomainError("E_1 diverges at x = 0")
    out = np.empty_like(x)
    zero = x == 0
    small = (x > 0) & (x <= 1.0)
    large = x > 1.0
    if np.any(zero):
        out[zero] = 1.0 / (n - 1)
    if np.any(small):
        xs = x[small]
        en = _e1_series(xs)
        ex = np.exp(-xs)
        for m in range(1, n):
            en = (ex - xs * en) / m
        out[small] = en
    if np.any(large):
        out[large] = _en_continued_fraction(n, x[large])
    return out[0] if scalar else out


# --------------------------------------------------------------------------
# quadrature

def gauss_legendre(n, a=-1.0, b=1.0) -> Quadrature:
    """n-point Gauss-Legendre rule on [a, b]."""
    if n < 1:
        raise ValueError("n must be positive")
    if not a < b:
        raise ValueError("require a < b")
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return Quadrature(nodes=half * x + 0.5 * (a + b), weights=half * w)


def double_gauss(n_per_hemisphere) -> Quadrature:
    """Gauss-Legendre applied separately on [-1, 0] and [0, 1].

    Intensities in a slab are smooth on each hemisphere but have a
    weak singularity at mu = 0, which a single rule on [-1, 1] straddles.
    """
    lo = gauss_legendre(n_per_hemisphere, -1.0, 0.0)
    hi = gauss_legendre(n_per_hemisphere, 0.0, 1.0)
    return Quadrature(np.concatenate([lo.nodes, hi.nodes]),
                      np.concatenate([lo.weights, hi.weights]))


def graded_double_gauss(n_per_hemisphere) -> Quadrature:
    """Double-Gauss rule in s with mu = s**2 on each hemisphere.

    Clusters nodes toward grazing directions, where intensities near a
    face behave like exp(-tau/|mu|).
    """
    g = gauss_legendre(n_per_hemisphere, 0.0, 1.0)
    mu = g.nodes ** 2
    w = 2.0 * g.nodes * g.weights
    return Quadrature(np.concatenate([-mu[::-1], mu]), np.concatenate([w[::-1], w]))


def trapezoid_weights(grid):
    grid = np.asarray(grid, dtype=float)
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def cumulative_trapezoid(values, grid):
    """Running trapezoid integral from grid[0], same length as grid."""
    values = np.asarray(values)
    h = np.diff(grid)
    out = np.zeros(values.shape, dtype=values.dtype)
    out[..., 1:] = np.cumsum(0.5 * h * (values[..., 1:] + values[..., :-1]), axis=-1)
    return out


# --------------------------------------------------------------------------
# ODE integration

@dataclass
class OdeResult:
    grid: np.ndarray
    values: np.ndarray          # shape (n_components, n_points)
    dense: Callable             # dense output, z -> (n_components, ...)
    nfev: int

    def component(self, i):
        return self.values[i]


def integrate_ode(rhs, y0, z_span, tol=1e-10, z_eval: Optional[Sequence[float]] = None,
                  max_step=np.inf, method="RK45") -> OdeResult:
    """Adaptive embedded Runge-Kutta integration with dense output.

    ``method`` is "RK45" (Dormand-Prince 4(5)) or "DOP853" when the dense
    output must be accurate well beyond the step tolerance. ``z_span`` may
    run backwards (z1 < z0). Raises StiffnessError when the step size
    underflows.
    """
    z0, z1 = z_span
    sol = scipy.integrate.solve_ivp(rhs, (z0, z1), np.atleast_1d(y0), method=method,
                                    rtol=tol, atol=tol * 1e-2, dense_output=True,
                                    t_eval=z_eval, max_step=max_step)
    if sol.status != 0:
        zfail = sol.t[-1] if len(sol.t) else z0
        raise StiffnessError(f"integration failed at z={zfail:.6g}: {sol.message}", z=zfail)
    grid = sol.t if z_eval is not None else sol.t
    return OdeResult(grid=np.asarray(grid), values=np.asarray(sol.y), dense=sol.sol, nfev=sol.nfev)


# --------------------------------------------------------------------------
# roots and linear algebra

def brent_root(f, bracket, tol=1e-12, maxiter=200):
    a, b = bracket
    fa, fb = f(a), f(b)
    if fa == 0:
        return float(a)
    if fb == 0:
        return float(b)
    if np.sign(fa) == np.sign(fb):
        raise BracketError(f"no sign change on [{a}, {b}]: f(a)={fa:.3g}, f(b)={fb:.3g}")
    return float(scipy.optimize.brentq(f, a, b, xtol=tol, rtol=4 * np.finfo(float).eps,
                                       maxiter=maxiter))


RCOND_MIN = 1e-14


def solve_dense_complex(A, b, rcond_min=RCOND_MIN):
    """LU solve with a reciprocal condition estimate guard."""
    A = np.asarray(A, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    lu, piv, info = scipy.linalg.lapack.zgetrf(A)
    if info > 0:
        raise SingularMatrixError("matrix is exactly singular", rcond=0.0)
    anorm = np.linalg.norm(A, 1)
    rcond, _ = scipy.linalg.lapack.zgecon(lu, anorm, norm="1")
    if rcond < rcond_min:
        raise SingularMatrixError(f"matrix is ill-conditioned (rcond={rcond:.3g})", rcond=rcond)
    x, info = scipy.linalg.lapack.zgetrs(lu, piv, b)
    return x
