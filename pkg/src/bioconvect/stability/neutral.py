"""Neutral curves, critical points and mode labelling."""
import functools
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.optimize
from threadpoolctl import threadpool_limits

from ..basestate import BaseState, SuspensionParams, solve_base_state
from ..errors import BioconvectError, ConvergenceError
from . import nrk
from .types import CriticalPoint, EigenSolution, NeutralCurve, NeutralPoint, StabilityConfig


PROBE_R_CAP = 3000.0
JUMP_TOLERANCE = 0.5


class RangeWarning(UserWarning):
    """The minimum of a neutral branch lies on the end of the k-range."""


@functools.lru_cache(maxsize=16)
def _cached_base(params: SuspensionParams, grid_size: int) -> BaseState:
    return solve_base_state(params, grid_size)


def base_for(config: StabilityConfig) -> BaseState:
    return _cached_base(config.params, config.base_grid)


# --------------------------------------------------------------------------
# single points

def solve_marginal_point(k: float, config: StabilityConfig, branch: str = "stationary",
                         guess: Optional[EigenSolution] = None, base: Optional[BaseState] = None,
                         mode_branch: int = 0) -> EigenSolution:
    """Marginal eigen-solution at wavenumber ``k``.

    ``branch="stationary"`` fixes sigma = 0; ``"oscillatory"`` solves for
    sigma = i gamma as well, starting from ``guess`` when given and from a
    spectrum probe otherwise.
    """
    if not k > 0:
        raise ValueError("k must be positive")
    base = base if base is not None else base_for(config)
    with threadpool_limits(1):
        system = nrk.build_box_system(base, config, k)
        if branch == "stationary":
            return nrk.solve_stationary(system, guess, config.newton_tol, config.max_newton,
                                        branch=mode_branch)
        if branch != "oscillatory":
            raise ValueError("branch must be 'stationary' or 'oscillatory'")
        if guess is not None and guess.sigma.imag != 0:
            sol = nrk.oscillatory_secant(system, guess.R, guess.sigma.imag, guess.state,
                                         config.newton_tol)
            if sol is not None:
                return sol
        try:
            stat = nrk.solve_stationary(system, None, config.newton_tol, config.max_newton)
            R_max = min(2.0 * stat.R, PROBE_R_CAP)
        except BioconvectError:
            R_max = PROBE_R_CAP
        start = nrk.probe_oscillatory(system, R_max)
        if start is None:
            raise ConvergenceError(f"no oscillatory marginal mode found at k={k:.6g}")
        sol = nrk.oscillatory_secant(system, *start, tol=config.newton_tol)
        if sol is None:
            raise ConvergenceError(f"oscillatory continuation failed at k={k:.6g}")
        return sol


def leading_growth_rate(config: StabilityConfig, k: float, R: float,
                        base: Optional[BaseState] = None) -> complex:
    """Growth rate with the largest real part at (k, R)."""
    base = base if base is not None else base_for(config)
    with threadpool_limits(1):
        system = nrk.build_box_system(base, config, k)
        return complex(nrk.growth_rates(system, R, nev=8)[0])


def count_vertical_modes(solution) -> int:
    """Number of vertically stacked cells: 1 + interior sign changes of W.

    The phase is rotated first so that the real part carries the largest
    possible share of the norm.
    """
    W = np.asarray(getattr(solution, "W", solution), dtype=complex)
    alpha = -0.5 * np.angle(np.sum(W * W))
    w = (W * np.exp(1j * alpha)).real
    interior = w[1:-1]
    thresh = 1e-6 * np.max(np.abs(w))
    signs = np.sign(interior[np.abs(interior) > thresh])
    return 1 + int(np.count_nonzero(signs[1:] != signs[:-1]))


# --------------------------------------------------------------------------
# tracing

@dataclass
class _ChunkResult:
    points: List[NeutralPoint] = field(default_factory=list)
    solutions: Dict[Tuple[float, str, int], EigenSolution] = field(default_factory=dict)
    slopes: List[Tuple[float, float]] = field(default_factory=list)
    failures: List[Tuple[float, str]] = field(default_factory=list)
    flagged: List[Tuple[float, float]] = field(default_factory=list)


def _trace_chunk(config: StabilityConfig, ks) -> _ChunkResult:
    out = _ChunkResult()
    base = base_for(config)
    prev_stat: Dict[int, EigenSolution] = {}
    prev_osc: Optional[EigenSolution] = None
    with threadpool_limits(1):
        for k in ks:
            k = float(k)
            system = nrk.build_box_system(base, config, k)
            stat0 = None
            for b in range(config.branch_count):
                sol = None
                guess = prev_stat.get(b)
                try:
                    sol = nrk.solve_stationary(system, guess, config.newton_tol, config.max_newton,
                                               branch=b)
                    if guess is not None and abs(sol.R - guess.R) > JUMP_TOLERANCE * abs(guess.R):
                        cold = nrk.solve_stationary(system, None, config.newton_tol,
                                                    config.max_newton, branch=b)
                        if abs(cold.R - guess.R) > JUMP_TOLERANCE * abs(guess.R):
                            out.flagged.append((k, float(cold.R)))
                        sol = cold
                except BioconvectError as exc:
                    if guess is not None:
                        try:
                            sol = nrk.solve_stationary(system, None, config.newton_tol,
                                                       config.max_newton, branch=b)
                        except BioconvectError as exc2:
                            exc = exc2
                    if sol is None:
                        out.failures.append((k, f"stationary[{b}]: {exc}"))
                        prev_stat.pop(b, None)
                        continue
                prev_stat[b] = sol
                out.solutions[(k, "stationary", b)] = sol
                out.points.append(NeutralPoint(k, float(sol.R), 0.0, "stationary",
                                               count_vertical_modes(sol), b))
                if b == 0:
                    stat0 = sol
            if stat0 is not None:
                try:
                    out.slopes.append((k, nrk.sigma_slope(system, stat0)))
                except BioconvectError:
                    pass
            if not config.detect_oscillatory:
                continue
            osc = None
            if prev_osc is not None:
                osc = nrk.oscillatory_secant(system, prev_osc.R, prev_osc.sigma.imag, prev_osc.state,
                                             config.newton_tol)
                if osc is not None and abs(osc.R - prev_osc.R) > JUMP_TOLERANCE * abs(prev_osc.R):
                    osc = None
            if osc is None:
                R_max = PROBE_R_CAP if stat0 is None else min(2.0 * stat0.R, PROBE_R_CAP)
                try:
                    start = nrk.probe_oscillatory(system, R_max)
                except BioconvectError:
                    start = None
                if start is not None:
                    osc = nrk.oscillatory_secant(system, *start, tol=config.newton_tol)
            prev_osc = osc
            if osc is not None:
                out.solutions[(k, "oscillatory", 0)] = osc
                out.points.append(NeutralPoint(k, float(osc.R), abs(float(osc.sigma.imag)),
                                               "oscillatory", count_vertical_modes(osc), 0))
    return out


def _chunks(ks, size):
    return [ks[i:i + size] for i in range(0, len(ks), size)]


def _run_chunks(config, chunks, workers):
    if workers <= 1 or len(chunks) == 1:
        return [_trace_chunk(config, c) for c in chunks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_trace_chunk, config, c) for c in chunks]
        return [f.result() for f in futures]


def _bifurcation_k(config, base, slopes, solutions, osc_ks):
    """k where the oscillatory branch leaves the stationary one.

    There d Im R(i gamma)/d gamma changes sign on a continuous stretch of
    the stationary branch (same mode, no jump). When several such changes
    occur, the one nearest the end of the oscillatory branch is taken.
    """
    candidates = []
    for (k0, s0), (k1, s1) in zip(slopes[:-1], slopes[1:]):
        a = solutions.get((k0, "stationary", 0))
        b = solutions.get((k1, "stationary", 0))
        if a is None or b is None or np.sign(s0) == np.sign(s1) or s0 == 0:
            continue
        if count_vertical_modes(a) != count_vertical_modes(b):
            continue
        if max(a.R, b.R) > 2.0 * min(a.R, b.R):
            continue
        candidates.append((k0, k1, a))
    if not candidates:
        return None
    if osc_ks:
        ends = [min(osc_ks), max(osc_ks)]
        candidates.sort(key=lambda c: min(abs(0.5 * (c[0] + c[1]) - e) for e in ends))
    k0, k1, g0 = candidates[0]

    def f(k):
        with threadpool_limits(1):
            system = nrk.build_box_system(base, config, k)
            sol = nrk.solve_stationary(system, g0, config.newton_tol, config.max_newton)
            return nrk.sigma_slope(system, sol)
    try:
        return float(scipy.optimize.brentq(f, k0, k1, xtol=1e-5))
    except (BioconvectError, ValueError):
        return 0.5 * (k0 + k1)


def trace_neutral_curve(config: StabilityConfig, workers: int = 1, ks=None) -> NeutralCurve:
    """Marginal Rayleigh number against wavenumber on every branch.

    The k-grid is split into fixed chunks, each cold-started independently,
    so the result does not depend on how many workers run the chunks.
    """
    ks = np.asarray(config.k_values() if ks is None else ks, dtype=float)
    results = _run_chunks(config, _chunks(list(ks), config.chunk_size), workers)
    points, failures, flagged, slopes = [], [], [], []
    solutions = {}
    for r in results:
        points += r.points
        failures += r.failures
        flagged += r.flagged
        slopes += r.slopes
        solutions.update(r.solutions)
    k_b = None
    if config.detect_oscillatory and any(p.branch == "oscillatory" for p in points):
        k_b = _bifurcation_k(config, base_for(config), slopes, solutions,
                            [p.k for p in points if p.branch == "oscillatory"])
    return NeutralCurve(points=points, bifurcation_k=k_b, failures=failures, flagged=flagged,
                        solutions=solutions, slopes=slopes)


# --------------------------------------------------------------------------
# critical point

def _refine_minimum(config, base, branch, branch_id, samples, solutions):
    ks = np.array([p.k for p in samples])
    Rs = np.array([p.R for p in samples])
    i = int(np.argmin(Rs))
    if i == 0 or i == len(ks) - 1:
        p = samples[i]
        return p.k, p.R, p.im_sigma, p.mode, True
    seed = solutions.get((samples[i].k, branch, branch_id))
    memo = {}

    def R_of(k):
        k = float(k)
        if k not in memo:
            try:
                sol = solve_marginal_point(k, config, branch, guess=seed, base=base,
                                           mode_branch=branch_id)
                memo[k] = (sol.R, abs(sol.sigma.imag), count_vertical_modes(sol))
            except BioconvectError:
                memo[k] = (np.inf, 0.0, 0)
        return memo[k][0]

    res = scipy.optimize.minimize_scalar(R_of, bracket=(ks[i - 1], ks[i], ks[i + 1]),
                                         method="golden", tol=1e-6)
    k_c = float(res.x)
    R_c, im_sigma, mode = memo.get(k_c, (res.fun, samples[i].im_sigma, samples[i].mode))
    if not np.isfinite(R_c) or R_c > Rs[i]:
        p = samples[i]
        return p.k, p.R, p.im_sigma, p.mode, False
    return k_c, float(R_c), im_sigma, mode, False


def find_critical(config: StabilityConfig, curve: Optional[NeutralCurve] = None,
                  workers: int = 1) -> CriticalPoint:
    """Global minimum of the marginal Rayleigh number over all traced branches."""
    curve = curve if curve is not None else trace_neutral_curve(config, workers)
    base = base_for(config)
    solutions = curve.solutions
    best = None
    groups = {}
    for p in curve.points:
        groups.setdefault((p.branch, p.branch_id), []).append(p)
    for (branch, bid), samples in sorted(groups.items()):
        # refine only around contiguous runs of the branch
        cand = _refine_minimum(config, base, branch, bid, samples, solutions)
        if best is None or cand[1] < best[1][1]:
            best = (branch, cand)
    if best is None:
        raise ConvergenceError("no marginal points were found on the k-range")
    branch, (k_c, R_c, im_sigma, mode, at_edge) = best
    if at_edge:
        warnings.warn(f"minimum of the {branch} branch lies at the k-range end k={k_c:.4g}; "
                      "widen k_range", RangeWarning, stacklevel=2)
    return CriticalPoint(k_c=k_c, R_c=R_c, oscillatory=branch == "oscillatory",
                         im_sigma=im_sigma if branch == "oscillatory" else 0.0, mode=mode,
                         bifurcation_k=curve.bifurcation_k, boundary_minimum=at_edge)
