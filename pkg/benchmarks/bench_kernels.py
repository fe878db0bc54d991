"""Compare the numba and numpy transport-sweep kernels.

    python3 benchmarks/bench_kernels.py [--nodes 129] [--repeat 5]

Both paths are timed on the same inputs and their outputs compared. The
library picks numba by default; BIOCONVECT_DISABLE_NUMBA=1 selects numpy.
"""
import argparse
import time

import numpy as np

from bioconvect import kernels
from bioconvect._accel import USE_NUMBA
from bioconvect.radiative import DEFAULT_N_MU, DEFAULT_N_PHI, product_ordinates


def _inputs(n_nodes, seed=0):
    rng = np.random.default_rng(seed)
    ords = product_ordinates(DEFAULT_N_MU, DEFAULT_N_PHI)
    h = np.full(n_nodes - 1, 1.0 / (n_nodes - 1))
    dtau = h * (0.5 + rng.random(n_nodes - 1))
    kv = 2.0 * ords.nu1
    shape = (len(ords.mu), n_nodes)
    Q = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    Id = rng.random(shape)
    return h, dtau, ords.mu, kv, Q, Id, ords.weights, ords.weights * ords.nu1


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def _flat(out):
    parts = out if isinstance(out, tuple) else (out,)
    return np.concatenate([np.ravel(x) for x in parts])


def run(n_nodes=129, repeat=5):
    h, dtau, mu, kv, Q, Id, w0, wa = _inputs(n_nodes)
    # warm up the compiled kernels so compilation is not timed
    kernels.sweep_apply(h, dtau, mu, kv, Q, use_numba=True)
    kernels.sweep_moments(h, dtau, mu, kv, Id, w0, wa, use_numba=True)
    rows = []
    for name, call in (
            ("sweep_apply", lambda nb: kernels.sweep_apply(h, dtau, mu, kv, Q, use_numba=nb)),
            ("sweep_moments", lambda nb: kernels.sweep_moments(h, dtau, mu, kv, Id, w0, wa,
                                                               use_numba=nb))):
        t_nb, out_nb = _best(lambda: call(True), repeat)
        t_np, out_np = _best(lambda: call(False), repeat)
        a, b = _flat(out_nb), _flat(out_np)
        diff = float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))
        rows.append((name, t_nb, t_np, diff))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=129)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"library default path: {'numba' if USE_NUMBA else 'numpy'}")
    print(f"{'kernel':<15}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}{'rel diff':>12}")
    for name, t_nb, t_np, diff in run(args.nodes, args.repeat):
        print(f"{name:<15}{t_nb:>12.4g}{t_np:>12.4g}{t_np / t_nb:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
