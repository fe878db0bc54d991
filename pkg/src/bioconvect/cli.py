"""Command-line driver: base, neutral, critical and sweep subcommands.

Exit codes: 0 success, 1 partial success (failed points were recorded),
2 configuration error, 3 solver failure.
"""
import argparse
import contextlib
import csv
import json
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

from threadpoolctl import threadpool_limits

from .basestate import base_peak_location, solve_base_state, write_profile_csv
from .config import EXECUTION_KEYS, RunConfig
from .errors import BioconvectError, ConfigError
from .stability import find_critical, trace_neutral_curve
from .stability.neutral import RangeWarning

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

NEUTRAL_COLUMNS = ("k", "R", "Im_sigma", "branch", "mode", "branch_id", "status")
SWEEP_COLUMNS = ("value", "status", "k_c", "R_c", "oscillatory", "im_sigma", "wavelength",
                 "mode", "bifurcation_k", "boundary_minimum", "diagnostic")


def _g(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return f"{float(x):.17g}"


def _header(cfg: RunConfig, extra=()):
    lines = cfg.header_lines()
    lines += [f"effective.G_c = {_g(cfg.critical_intensity())}"]
    lines += list(extra)
    return lines


def _write_header(stream, lines):
    for line in lines:
        stream.write(f"# {line}\n")


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _info(path, msg):
    # summaries go to stderr when the data itself is on stdout
    print(msg, file=sys.stderr if path in (None, "-") else sys.stdout)


# --------------------------------------------------------------------------
# subcommands

def cmd_base(cfg: RunConfig, out=None, strict=False) -> int:
    path = out if out is not None else cfg["output.path"]
    params = cfg.suspension()
    state = solve_base_state(params, grid_size=cfg["basestate.grid_size"])
    peak = base_peak_location(state)
    extra = [f"result.n_top = {_g(state.n_top)}",
             f"result.shooting_residual = {_g(state.shooting_residual)}",
             f"result.z_max = {_g(peak.z_max)}", f"result.n_max = {_g(peak.n_max)}",
             f"result.degenerate = {_g(peak.flat)}"]
    with _output(path) as fh:
        write_profile_csv(state, fh, _header(cfg, extra))
    if peak.flat:
        _info(path, "peak: degenerate (uniform concentration)")
    else:
        where = "interior" if peak.interior else "boundary"
        _info(path, f"peak: z_max = {peak.z_max:.6f}  n_max = {peak.n_max:.6f}  ({where})")
    return EXIT_OK


def cmd_neutral(cfg: RunConfig, out=None, strict=False) -> int:
    path = out if out is not None else cfg["output.path"]
    curve = trace_neutral_curve(cfg.stability(), workers=cfg["run.workers"])
    rows = [(p.k, p.branch, p.branch_id, p.R, p.im_sigma, p.mode, "ok") for p in curve.points]
    rows += [(k, "failed", -1, math.nan, math.nan, -1, msg) for k, msg in curve.failures]
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    extra = [f"result.bifurcation_k = {_g(curve.bifurcation_k)}",
             f"result.failures = {len(curve.failures)}"]
    with _output(path) as fh:
        _write_header(fh, _header(cfg, extra))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NEUTRAL_COLUMNS)
        for k, branch, bid, R, im, mode, status in rows:
            w.writerow([_g(k), _g(R), _g(im), branch, mode, bid, status])
    kb = "none" if curve.bifurcation_k is None else f"{curve.bifurcation_k:.4f}"
    _info(path, f"neutral: {len(curve.points)} points, {len(curve.failures)} failures, k_b = {kb}")
    return EXIT_PARTIAL if curve.failures else EXIT_OK


def _critical_record(cp):
    return {"k_c": cp.k_c, "R_c": cp.R_c, "oscillatory": cp.oscillatory,
            "im_sigma": cp.im_sigma, "wavelength": cp.wavelength, "mode": cp.mode,
            "bifurcation_k": cp.bifurcation_k, "boundary_minimum": cp.boundary_minimum}


def _config_record(cfg: RunConfig):
    return {key: {"value": list(v) if isinstance(v, tuple) else v,
                  "defaulted": cfg.defaulted(key)}
            for key, v in cfg.items() if key not in EXECUTION_KEYS}


def _solve_critical(cfg: RunConfig, workers):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RangeWarning)
        cp = find_critical(cfg.stability(), workers=workers)
    messages = [str(w.message) for w in caught if issubclass(w.category, RangeWarning)]
    return cp, messages


def cmd_critical(cfg: RunConfig, out=None, strict=False) -> int:
    path = out if out is not None else cfg["output.path"]
    cp, range_warnings = _solve_critical(cfg, cfg["run.workers"])
    for msg in range_warnings:
        print(f"warning: {msg}", file=sys.stderr)
    if range_warnings and strict:
        print("error: boundary minimum with --strict", file=sys.stderr)
        return EXIT_SOLVER
    doc = {"config": _config_record(cfg), "effective": {"G_c": cfg.critical_intensity()},
           "result": _critical_record(cp)}
    with _output(path) as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")
    kind = "oscillatory" if cp.oscillatory else "stationary"
    _info(path, f"critical: k_c = {cp.k_c:.4f}  R_c = {cp.R_c:.4f}  ({kind})")
    return EXIT_OK


@dataclass
class SweepPoint:
    value: float
    critical: Optional[object] = None
    diagnostic: str = ""

    @property
    def ok(self):
        return self.critical is not None


@dataclass
class SweepResult:
    axis: str
    points: List[SweepPoint] = field(default_factory=list)

    @property
    def failures(self):
        return [p for p in self.points if not p.ok]


def _sweep_point(cfg_text, key, value, G_c):
    try:
        cfg = RunConfig.from_text(cfg_text, [f"{key}={value!r}", f"taxis.G_c={G_c!r}"])
        with threadpool_limits(1):
            cp, msgs = _solve_critical(cfg, 1)
        return SweepPoint(value, cp, "; ".join(msgs))
    except (BioconvectError, ValueError, ArithmeticError) as exc:
        return SweepPoint(value, None, f"{type(exc).__name__}: {exc}")


def run_sweep(cfg: RunConfig, workers=1) -> SweepResult:
    """Critical point at every axis value, in axis order; failures are recorded."""
    key = cfg.sweep_key()
    values = [float(v) for v in cfg["sweep.values"]]
    if not values:
        raise ConfigError("sweep.values is empty")
    for v in values:      # validate every point before any work starts
        cfg.updated({key: repr(v)})
    text = cfg.to_text()
    G_c = cfg.critical_intensity()      # held fixed along the sweep
    if workers <= 1 or len(values) == 1:
        points = [_sweep_point(text, key, v, G_c) for v in values]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_sweep_point, text, key, v, G_c) for v in values]
            points = [f.result() for f in futures]
    return SweepResult(axis=key, points=points)


def trend_summary(values, series):
    """Direction of consecutive changes and the positions where it flips."""
    steps = []
    for a, b in zip(series[:-1], series[1:]):
        steps.append("up" if b > a else "down" if b < a else "flat")
    flips = [values[i + 1] for i in range(len(steps) - 1) if steps[i] != steps[i + 1]]
    return steps, flips


def cmd_sweep(cfg: RunConfig, out=None, strict=False) -> int:
    path = out if out is not None else cfg["output.path"]
    result = run_sweep(cfg, cfg["run.workers"])
    with _output(path) as fh:
        _write_header(fh, _header(cfg, [f"result.axis = {result.axis}",
                                        f"result.failures = {len(result.failures)}"]))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for p in result.points:
            if p.ok:
                c = p.critical
                w.writerow([_g(p.value), "ok", _g(c.k_c), _g(c.R_c), _g(c.oscillatory),
                            _g(c.im_sigma), _g(c.wavelength), c.mode, _g(c.bifurcation_k),
                            _g(c.boundary_minimum), p.diagnostic])
            else:
                w.writerow([_g(p.value), "failed", "", "", "", "", "", "", "", "", p.diagnostic])
    good = [p for p in result.points if p.ok]
    if len(good) >= 2:
        xs = [p.value for p in good]
        for name, attr in (("R_c", "R_c"), ("k_c", "k_c")):
            steps, flips = trend_summary(xs, [getattr(p.critical, attr) for p in good])
            flip_txt = ", ".join(f"{x:g}" for x in flips) if flips else "none"
            _info(path, f"trend {name} vs {result.axis}: {' '.join(steps)} "
                        f"(direction changes at {flip_txt})")
    _info(path, f"sweep: {len(good)}/{len(result.points)} points succeeded")
    if strict and any(p.ok and p.critical.boundary_minimum for p in result.points):
        return EXIT_SOLVER
    return EXIT_PARTIAL if result.failures else EXIT_OK


COMMANDS = {"base": cmd_base, "neutral": cmd_neutral, "critical": cmd_critical,
            "sweep": cmd_sweep}


def build_parser():
    parser = argparse.ArgumentParser(prog="bioconvect",
                                     description="Phototactic bioconvection under oblique light.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration key (repeatable)")
        p.add_argument("--out", help="output file ('-' for stdout)")
        p.add_argument("--threads", type=int, help="worker processes")
        p.add_argument("--strict", action="store_true",
                       help="treat boundary minima as errors")
        if name == "sweep":
            p.add_argument("--axis", help="sweep parameter (theta_i, omega, kappa, V_c, Le, R_T)")
            p.add_argument("--values", help="comma-separated axis values")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.set)
    if args.threads is not None:
        overrides.append(f"run.workers={args.threads}")
    if getattr(args, "axis", None):
        overrides.append(f"sweep.axis={args.axis}")
    if getattr(args, "values", None):
        overrides.append(f"sweep.values={args.values}")
    try:
        cfg = RunConfig.load(args.config, overrides)
        cfg.suspension()          # surfaces parameter errors before solving
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BioconvectError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args.out, args.strict)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BioconvectError as exc:
        residual = getattr(exc, "residual", None)
        extra = "" if residual is None else f" (residual {residual:.3e})"
        print(f"solver failure: {type(exc).__name__}: {exc}{extra}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
