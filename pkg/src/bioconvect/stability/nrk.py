"""Box-scheme discretisation of the perturbation equations and the
Newton-Raphson-Kantorovich eigen-solver.

The nine-component first-order system

    y = (W, DW, D^2W, D^3W, Phi, Theta, F, T, DT)

is written as ``y' = L(z; sigma, R) y + N[y]`` where N holds the nonlocal
radiation coupling. Trapezoidal (box) differencing on a uniform grid gives a
sparse matrix ``A(R, sigma) = A0 + sigma A_sigma + R A_R`` because both the
growth rate and the targeted Rayleigh number enter linearly. A marginal mode
is a null vector of ``A``; Newton iterations on the bordered system
[A, A_R y; e^T, 0] fix R together with the normalisation D^3W(0) = 1.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ConvergenceError, SingularMatrixError, SpuriousModeError
from ..radiative import perturbed_moment_operator
from .coefficients import cell_coefficients
from .types import EigenSolution, StabilityConfig

NCOMP = 9
IW0, IW1, IW2, IW3, IPHI, ITH, IF, IT0, IT1 = range(NCOMP)


@dataclass
class BoxSystem:
    k: float
    z: np.ndarray
    A0: sp.csc_matrix
    A_sigma: sp.csc_matrix
    A_R: sp.csc_matrix
    norm_index: int

    @property
    def size(self):
        return self.A0.shape[0]

    def matrix(self, R, sigma=0.0):
        return (self.A0 + sigma * self.A_sigma + R * self.A_R).tocsc()

    def unpack(self, y):
        Y = np.asarray(y).reshape(len(self.z), NCOMP)
        return Y


def _pencil_pieces(config: StabilityConfig, k):
    """Constant 9x9 blocks of L: (L0, L_sigma, L_R) excluding profile terms."""
    p = config.params
    L0 = np.zeros((NCOMP, NCOMP), dtype=complex)
    Ls = np.zeros_like(L0)
    LR = np.zeros_like(L0)
    prandtl = p.Pr if config.momentum_sigma == "prandtl" else p.Pr / p.Le
    k2 = k * k
    L0[IW0, IW1] = L0[IW1, IW2] = L0[IW2, IW3] = 1.0
    L0[IW3, IW2] = 2 * k2
    Ls[IW3, IW2] = 1.0 / prandtl
    L0[IW3, IW0] = -k2 * k2
    Ls[IW3, IW0] = -k2 / prandtl
    if config.eigen_target == "R_b":
        LR[IW3, ITH] = -k2
        L0[IW3, IT0] = p.R_T * k2
    else:
        LR[IW3, IT0] = k2
        L0[IW3, ITH] = -p.R_b * k2
    L0[IPHI, ITH] = 1.0
    L0[ITH, IF] = 1.0
    L0[IF, ITH] = k2
    Ls[IF, ITH] = p.Le
    L0[IT0, IT1] = 1.0
    L0[IT1, IT0] = k2
    Ls[IT1, IT0] = 1.0
    L0[IT1, IW0] = -1.0
    return L0, Ls, LR


def build_box_system(base, config: StabilityConfig, k: float, use_numba=None) -> BoxSystem:
    """Assemble A0, A_sigma and A_R at wavenumber ``k``."""
    p = config.params
    N = config.n_grid
    z = np.linspace(0.0, 1.0, N + 1)
    h = 1.0 / N
    sample = base.sample(z, n_mu=config.n_mu)
    cc = cell_coefficients(sample, p, k, config.collimated_cos_factor)
    L0, Ls, LR = _pencil_pieces(config, k)
    # per-node variable part of L (only in Theta' and F' rows)
    Lz = np.zeros((N + 1, NCOMP, NCOMP), dtype=complex)
    Lz[:, ITH, ITH] = cc.theta_theta
    Lz[:, ITH, IPHI] = cc.theta_phi
    Lz[:, IF, IW0] = cc.flux_W

    size = NCOMP * (N + 1)
    rows0, cols0, vals0 = [], [], []
    rows_s, cols_s, vals_s = [], [], []
    rows_r, cols_r, vals_r = [], [], []

    def col(j, c):
        return NCOMP * j + c

    # bottom conditions
    bottom = [IW0, IW1 if p.bottom == "rigid" else IW2, IF, IT0]
    for r, c in enumerate(bottom):
        rows0.append(r)
        cols0.append(col(0, c))
        vals0.append(1.0)
    nb = len(bottom)

    # interval equations, row = nb + 9 j + component
    j = np.arange(N)
    for c in range(NCOMP):
        r = nb + NCOMP * j + c
        rows0 += [r, r]
        cols0 += [col(j + 1, c), col(j, c)]
        vals0 += [np.ones(N), -np.ones(N)]
        for d in range(NCOMP):
            for Lmat, rr, cl, vv in ((L0, rows0, cols0, vals0), (Ls, rows_s, cols_s, vals_s),
                                     (LR, rows_r, cols_r, vals_r)):
                if Lmat[c, d] != 0:
                    rr += [r, r]
                    cl += [col(j, d), col(j + 1, d)]
                    vv += [np.full(N, -0.5 * h * Lmat[c, d])] * 2
            vz = Lz[:, c, d]
            if np.any(vz != 0):
                rows0 += [r, r]
                cols0 += [col(j, d), col(j + 1, d)]
                vals0 += [-0.5 * h * vz[:-1], -0.5 * h * vz[1:]]

    # nonlocal radiation coupling
    if p.optical.omega > 0.0 and p.V_c != 0.0:
        mop = perturbed_moment_operator(sample, k, p.optical, config.n_mu, config.n_phi,
                                        config.collimated_cos_factor, use_numba=use_numba)
        nodes = np.arange(N + 1)
        for c, coef, (Mt, Mp) in ((ITH, cc.theta_g1d, (mop.G_theta, mop.G_phi)),
                                  (IF, cc.flux_A, (mop.A_theta, mop.A_phi))):
            r = nb + NCOMP * j + c
            for var, Mx in ((ITH, Mt), (IPHI, Mp)):
                block = -0.5 * h * (coef[:-1, None] * Mx[:-1] + coef[1:, None] * Mx[1:])
                rows0.append(np.repeat(r, N + 1))
                cols0.append(np.tile(col(nodes, var), N))
                vals0.append(block.ravel())

    # top conditions
    top = [IW0, IW1 if p.top == "rigid" else IW2, IF, IPHI, IT0]
    r0 = nb + NCOMP * N
    for r, c in enumerate(top):
        rows0.append(r0 + r)
        cols0.append(col(N, c))
        vals0.append(1.0)

    def assemble(rows, cols, vals):
        if not rows:
            return sp.csc_matrix((size, size), dtype=complex)
        rr = np.concatenate([np.atleast_1d(x) for x in rows])
        cl = np.concatenate([np.atleast_1d(x) for x in cols])
        vv = np.concatenate([np.atleast_1d(np.asarray(x, dtype=complex)) for x in vals])
        return sp.csc_matrix((vv, (rr, cl)), shape=(size, size))

    return BoxSystem(k=k, z=z, A0=assemble(rows0, cols0, vals0),
                     A_sigma=assemble(rows_s, cols_s, vals_s), A_R=assemble(rows_r, cols_r, vals_r),
                     norm_index=col(0, IW3))


# --------------------------------------------------------------------------
# eigen-solves

def _start_vector(n):
    i = np.arange(n)
    return (1.0 + 0.3 * np.sin(0.7 * i) + 0.2j * np.cos(1.3 * i)).astype(complex)


def _factor(matrix):
    try:
        return spla.splu(matrix.tocsc())
    except RuntimeError as exc:
        raise SingularMatrixError(f"sparse factorisation failed: {exc}") from exc


def rayleigh_eigenvalues(system: BoxSystem, sigma=0.0, shift=0.0, nev=8):
    """Eigenvalues R of A0 + sigma A_sigma + R A_R nearest ``shift``, with vectors."""
    Asig = system.A0 + sigma * system.A_sigma
    lu = _factor(Asig + shift * system.A_R)
    A_R = system.A_R
    n = system.size
    op = spla.LinearOperator((n, n), matvec=lambda v: lu.solve(np.asarray(A_R @ v, dtype=complex)),
                             dtype=complex)
    rank = A_R.getnnz()
    nev = max(1, min(nev, rank - 2, n - 2))
    nu, vecs = spla.eigs(op, k=nev, which="LM", v0=_start_vector(n), tol=1e-13,
                         ncv=min(n, max(2 * nev + 1, 24)), maxiter=10000)
    R = shift - 1.0 / nu
    order = np.lexsort((R.imag, R.real))
    return R[order], vecs[:, order]


def growth_rates(system: BoxSystem, R, shift=0.5, nev=8, vectors=False):
    """Growth rates sigma of A0 + R A_R + sigma A_sigma nearest ``shift``,
    sorted by decreasing real part."""
    A = system.A0 + R * system.A_R
    lu = _factor(A + shift * system.A_sigma)
    As = system.A_sigma
    n = system.size
    op = spla.LinearOperator((n, n), matvec=lambda v: lu.solve(np.asarray(As @ v, dtype=complex)),
                             dtype=complex)
    nu, V = spla.eigs(op, k=nev, which="LM", v0=_start_vector(n), tol=1e-13,
                      ncv=min(n, max(2 * nev + 1, 24)), maxiter=10000)
    sig = shift - 1.0 / nu
    order = np.lexsort((-sig.imag, -sig.real))
    if vectors:
        return sig[order], V[:, order]
    return sig[order]


def _normalise(system, y):
    e = y[system.norm_index]
    if abs(e) < 1e-300:
        raise SpuriousModeError("eigenfunction has vanishing D^3W(0); cannot normalise")
    return y / e


def newton_eigen(system: BoxSystem, R0, y0, sigma=0.0, tol=1e-10, max_iter=50):
    """Bordered Newton iterations for (y, R) at fixed growth rate ``sigma``."""
    R = complex(R0)
    y = _normalise(system, np.asarray(y0, dtype=complex))
    n = system.size
    e = sp.csc_matrix(([1.0], ([0], [system.norm_index])), shape=(1, n), dtype=complex)
    Asig = system.A0 + sigma * system.A_sigma
    last = np.inf
    for it in range(1, max_iter + 1):
        A = Asig + R * system.A_R
        res = A @ y
        col = (system.A_R @ y).reshape(-1, 1)
        J = sp.bmat([[A, sp.csc_matrix(col)], [e, None]], format="csc")
        rhs = -np.concatenate([res, [y[system.norm_index] - 1.0]])
        delta = _factor(J).solve(rhs)
        y = y + delta[:n]
        R = R + delta[n]
        step = abs(delta[n])
        last = step
        if step <= tol * max(1.0, abs(R)) and np.max(np.abs(delta[:n])) <= 1e-8 * np.max(np.abs(y)):
            res = np.linalg.norm(system.matrix(R, sigma) @ y) / max(np.linalg.norm(y), 1e-300)
            return R, y, it, res
    raise ConvergenceError(f"NRK iterations did not converge in {max_iter} steps "
                           f"(last |dR| = {last:.3g})", residual=last)


def to_solution(system: BoxSystem, R, sigma, y, iterations=0, residual=0.0) -> EigenSolution:
    Y = system.unpack(y)
    scale = np.max(np.abs(Y[:, IW0]))
    if scale < 1e-12 * max(1.0, np.max(np.abs(Y))):
        raise SpuriousModeError("velocity eigenfunction is degenerate")
    return EigenSolution(k=system.k, R=R, sigma=sigma, z=system.z, W=Y[:, IW0].copy(),
                         Phi=Y[:, IPHI].copy(), Theta=Y[:, ITH].copy(), T=Y[:, IT0].copy(),
                         F=Y[:, IF].copy(), state=np.asarray(y).copy(), iterations=iterations,
                         residual=residual)


def stationary_cold_start(system: BoxSystem, count=1, shifts=(0.0, 300.0, 1000.0, 3000.0)):
    """Smallest positive real Rayleigh eigenvalues at sigma = 0."""
    found = []
    for s in shifts:
        R, V = rayleigh_eigenvalues(system, 0.0, s, nev=max(8, 2 * count + 4))
        real = np.abs(R.imag) <= 1e-6 * np.maximum(1.0, np.abs(R.real))
        for r, v in zip(R[real], V[:, real].T):
            if r.real > 0 and all(abs(r.real - f[0]) > 1e-6 * abs(r.real) for f in found):
                found.append((r.real, v))
        if len(found) >= count:
            break
    if not found:
        raise ConvergenceError(f"no positive real stationary eigenvalue at k={system.k:.6g}")
    found.sort(key=lambda t: t[0])
    return found[:count]


def solve_stationary(system: BoxSystem, guess=None, tol=1e-10, max_iter=50, branch=0) -> EigenSolution:
    if guess is None:
        R0, v0 = stationary_cold_start(system, count=branch + 1)[branch]
    else:
        R0, v0 = guess.R.real, guess.state
    R, y, it, res = newton_eigen(system, R0, v0, 0.0, tol, max_iter)
    if abs(R.imag) > 1e-6 * max(1.0, abs(R.real)):
        raise ConvergenceError(f"stationary eigenvalue became complex at k={system.k:.6g} "
                               f"(R = {R:.6g})", residual=abs(R.imag))
    return to_solution(system, float(R.real), 0.0, y.real if np.allclose(y.imag, 0) else y, it, res)


def sigma_slope(system: BoxSystem, sol: EigenSolution, delta=1e-4, tol=1e-12):
    """d Im R(i gamma)/d gamma at gamma = 0, the real part of dR/dsigma.

    It vanishes where an oscillatory branch leaves the stationary one.
    """
    R, _, _, _ = newton_eigen(system, sol.R, sol.state, 1j * delta, tol)
    return R.imag / delta


def oscillatory_secant(system: BoxSystem, R_guess, gamma_guess, y_guess, tol=1e-10,
                       max_iter=40) -> Optional[EigenSolution]:
    """Marginal oscillatory mode from a guess of (R, gamma, eigenvector).

    At fixed sigma = i gamma the Rayleigh eigenvalue R(i gamma) is complex;
    secant iterations in gamma drive its imaginary part to zero. Returns
    None when gamma collapses to zero or the iteration fails.
    """
    state = {"R": complex(R_guess), "y": np.asarray(y_guess, dtype=complex)}

    def f(g):
        R, y, _, _ = newton_eigen(system, state["R"], state["y"], 1j * g, 1e-12)
        state["R"], state["y"] = R, y
        return R.imag

    try:
        g0 = float(gamma_guess)
        g1 = g0 * (1.0 + 1e-3)
        f0, f1 = f(g0), f(g1)
        for _ in range(max_iter):
            if f1 == f0:
                break
            g2 = g1 - f1 * (g1 - g0) / (f1 - f0)
            if not np.isfinite(g2) or g2 <= 1e-6:
                return None
            # damp wild steps
            g2 = min(max(g2, 0.25 * g1), 4.0 * g1)
            g0, f0 = g1, f1
            g1, f1 = g2, f(g2)
            if abs(g1 - g0) <= tol * max(1.0, g1) and abs(f1) <= 1e-7 * max(1.0, abs(state["R"])):
                break
        else:
            return None
        if abs(f1) > 1e-6 * max(1.0, abs(state["R"])):
            return None
        R, y, it, res = newton_eigen(system, state["R"], state["y"], 1j * g1, tol)
    except (ConvergenceError, SingularMatrixError, SpuriousModeError):
        return None
    if R.real <= 0:
        return None
    return to_solution(system, float(R.real), 1j * g1, y, it, res)


def probe_oscillatory(system: BoxSystem, R_max, n_scan=33, R_min=0.0, nev=10):
    """Scan the spectrum for a complex pair whose real part crosses zero.

    Returns a guess (R, gamma, eigenvector) at the lowest crossing in
    [R_min, R_max], or None.
    """
    grid = np.linspace(R_min, R_max, n_scan)
    prev = None
    for R in grid:
        try:
            sig, V = growth_rates(system, R, nev=nev, vectors=True)
        except (SingularMatrixError, RuntimeError, ValueError):
            prev = None
            continue
        cplx = np.abs(sig.imag) > 1e-6 * np.maximum(1.0, np.abs(sig))
        if not np.any(cplx):
            prev = None
            continue
        i = int(np.flatnonzero(cplx)[np.argmax(sig[cplx].real)])
        cur = (R, sig[i], V[:, i])
        if prev is not None and prev[1].real < 0 <= cur[1].real:
            a, b = prev[1].real, cur[1].real
            t = -a / (b - a) if b != a else 0.5
            R_star = prev[0] + t * (cur[0] - prev[0])
            gamma = abs(prev[1].imag + t * (cur[1].imag - prev[1].imag))
            vec = cur[2] if t > 0.5 else prev[2]
            if cur[1].imag < 0:
                vec = vec.conj()
            return R_star, gamma, vec
        prev = cur
    return None
