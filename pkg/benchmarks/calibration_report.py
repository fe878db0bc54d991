"""Calibration sweep against a rigid-top overstable target point.

    python3 benchmarks/calibration_report.py [--out docs/calibration_report.md] [--workers N]

Rigid top, kappa = 1, omega = 0.4, V_c = 15, two-harmonic taxis with G_c set
so the normal-incidence peak sits at mid-depth. Traces the neutral curve at
theta_i = 40 (and 20 for context) for Le in {1, 4, 10} x R_T in {0, 50, 100},
then solves for the Lewis number that reproduces the target R_c.
"""
import argparse
import math
import os
import sys
import time
import warnings

import numpy as np
import scipy.optimize

from bioconvect.basestate import SuspensionParams, TwoHarmonicTaxis, calibrate_critical_intensity
from bioconvect.radiative import OpticalConfig
from bioconvect.stability import StabilityConfig, find_critical, trace_neutral_curve

TARGET_K, TARGET_R, TARGET_KB = 2.22, 329.53, 3.4
LE = (1.0, 4.0, 10.0)
R_T = (0.0, 50.0, 100.0)
GRID = dict(n_grid=64, k_range=(0.5, 8.0), n_k=16)


def base_params():
    p0 = SuspensionParams(optical=OpticalConfig(1.0, 0.4, 0.0), V_c=15.0, top="rigid")
    return p0.with_(taxis=TwoHarmonicTaxis(G_c=calibrate_critical_intensity(p0)))


def run(p0, theta, Le, RT, workers):
    p = p0.with_(optical=OpticalConfig(1.0, 0.4, theta), Le=Le, R_T=RT)
    cfg = StabilityConfig(params=p, **GRID)
    curve = trace_neutral_curve(cfg, workers)
    cp = find_critical(cfg, curve, workers)
    osc = [q.k for q in curve.points if q.branch == "oscillatory"]
    return {"theta": theta, "Le": Le, "R_T": RT, "k_c": cp.k_c, "R_c": cp.R_c,
            "branch": "oscillatory" if cp.oscillatory else "stationary",
            "k_b": curve.bifurcation_k, "osc": (min(osc), max(osc)) if osc else None}


def misfit(row):
    return max(abs(row["k_c"] / TARGET_K - 1), abs(row["R_c"] / TARGET_R - 1))


def fmt_row(r):
    kb = f"{r['k_b']:.2f}" if r["k_b"] is not None else "-"
    osc = f"{r['osc'][0]:.2f}-{r['osc'][1]:.2f}" if r["osc"] else "-"
    return (f"| {r['Le']:g} | {r['R_T']:g} | {r['k_c']:.3f} | {r['R_c']:.2f} | {r['branch']} | "
            f"{kb} | {osc} | {100 * (r['k_c'] / TARGET_K - 1):+.1f}% | "
            f"{100 * (r['R_c'] / TARGET_R - 1):+.1f}% |")


HEAD = ("| Le | R_T | k_c | R_c | branch at minimum | k_b | oscillatory k range | "
        "k_c error | R_c error |\n|---|---|---|---|---|---|---|---|---|")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "docs",
                                                  "calibration_report.md"))
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)
    warnings.simplefilter("ignore")
    t0 = time.perf_counter()
    p0 = base_params()
    rows = {th: [run(p0, th, le, rt, args.workers) for le in LE for rt in R_T]
            for th in (40.0, 20.0)}
    for r in rows[40.0]:
        print(fmt_row(r), flush=True)

    # R_c scales close to 1/Le; solve for the Lewis number that hits the target R_c
    ref = min(rows[40.0], key=lambda r: abs(math.log(r["R_c"] / TARGET_R)) + (r["R_T"] != 100.0))

    def gap(log_le):
        return math.log(run(p0, 40.0, math.exp(log_le), 100.0, args.workers)["R_c"] / TARGET_R)
    le_guess = ref["Le"] * ref["R_c"] / TARGET_R
    sol = scipy.optimize.root_scalar(gap, x0=math.log(le_guess), x1=math.log(le_guess) + 0.05,
                                     method="secant", xtol=1e-4, maxiter=8)
    le_star = float(np.exp(sol.root))
    matched = run(p0, 40.0, le_star, 100.0, args.workers)
    best = min(rows[40.0], key=misfit)
    near20 = min(rows[20.0], key=misfit)

    lines = [
        "# Calibration report",
        "",
        "Generated by `benchmarks/calibration_report.py`. The target rigid-top point at",
        f"theta_i = 40 is an overstable minimum at k_c = {TARGET_K}, R_c = {TARGET_R}, with the",
        f"oscillatory branch leaving the stationary one near k_b = {TARGET_KB}. Le, R_T, G_c and",
        "the taxis form are free parameters of the model, so they are swept here.",
        "",
        "Setup: rigid top and bottom, kappa = 1, omega = 0.4, V_c = 15, Pr = 5,",
        f"two-harmonic taxis with G_c = {p0.taxis.G_c:.5f} (normal-incidence peak at z = 0.5),",
        f"box grid {GRID['n_grid']} cells, {GRID['n_k']} wavenumbers on "
        f"[{GRID['k_range'][0]}, {GRID['k_range'][1]}], Hopf points refined by continuation.",
        "",
        "## theta_i = 40",
        "",
        HEAD,
        *[fmt_row(r) for r in rows[40.0]],
        "",
        "## theta_i = 20 (context)",
        "",
        HEAD,
        *[fmt_row(r) for r in rows[20.0]],
        "",
        "## Lewis number matched to R_c at theta_i = 40",
        "",
        HEAD,
        fmt_row(matched),
        "",
        f"R_c is close to inversely proportional to Le, so any target R_c is reachable "
        f"(Le = {le_star:.4f} at R_T = 100). The wavenumber does not follow: it stays near "
        f"{matched['k_c']:.2f}.",
        "",
        "## Closest match",
        "",
        "Within the swept grid, measured by the larger of the two relative errors at theta_i = 40:",
        f"Le = {best['Le']:g}, R_T = {best['R_T']:g}, giving k_c = {best['k_c']:.3f}, "
        f"R_c = {best['R_c']:.2f} ({best['branch']}, k_b = "
        f"{best['k_b'] if best['k_b'] is None else round(best['k_b'], 2)}).",
        "",
        "## Residual discrepancy",
        "",
        f"- Best grid point: k_c {100 * (best['k_c'] / TARGET_K - 1):+.1f}%, "
        f"R_c {100 * (best['R_c'] / TARGET_R - 1):+.1f}%.",
        f"- Matched Le = {le_star:.4f}: R_c {100 * (matched['R_c'] / TARGET_R - 1):+.2f}%, "
        f"k_c {100 * (matched['k_c'] / TARGET_K - 1):+.1f}%, k_b = "
        f"{matched['k_b'] if matched['k_b'] is None else round(matched['k_b'], 2)} "
        f"against {TARGET_KB}.",
        ("- No combination reaches 15% on both values." if misfit(best) > 0.15 else
         f"- Le = {best['Le']:g}, R_T = {best['R_T']:g} reaches 15% on both values.")
        + " Le and R_T move R_c but leave k_c and",
        "  k_b nearly fixed, so closing the wavenumber gap would need a different taxis form or G_c.",
        f"- At theta_i = 20 the point Le = {near20['Le']:g}, R_T = {near20['R_T']:g} gives "
        f"k_c = {near20['k_c']:.3f}, R_c = {near20['R_c']:.2f} ({near20['branch']}), "
        f"within {100 * misfit(near20):.1f}% of both values. It is listed as a",
        "  coincidence only; the incidence angle differs from the target case.",
        "",
        f"Runtime {time.perf_counter() - t0:.0f} s.",
        "",
    ]
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines))
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
