"""Compare the compiled and pure-numpy kernel backends on the hot path.

The dominant cost of every batch experiment is the tilted log-sum-exp over
quadrature nodes: one coefficient row per replica (or per prefix length)
against a shared node basis.  This script times both backends on that
workload, checks they agree, and reports the speedup.

Run from the repository root:

    python3 benchmarks/bench_kernels.py --rows 2000 --repeats 5
"""

import argparse
import time

import numpy as np

from rfmfs import _kernels_py
from rfmfs.numerics import grid_for

try:
    from rfmfs import _kernels
except ImportError:
    _kernels = None


def node_basis(n: int):
    grid = grid_for(n)
    xs, ys = grid.xs, grid.ys
    lnw = np.log(grid.w)
    return grid, (lnw, xs * xs, xs, ys, np.log1p(-(xs * xs + ys * ys)))


def replica_rows(rows: int, n: int, beta: float, J: float, seed: int):
    """Coefficient rows shaped like a replica batch at volume n: CLT-scale
    scatter in the prefix statistics."""
    gen = np.random.default_rng(seed)
    mp = gen.normal(0.0, 1.0 / np.sqrt(n), size=rows)
    mq = np.sqrt(np.maximum(1.0 - mp * mp, 1e-12))
    out = np.empty((rows, 4))
    out[:, 0] = n * beta * J / 2.0
    out[:, 1] = n * beta * mp
    out[:, 2] = n * beta * mq
    out[:, 3] = n / 2.0 - 2.0
    return out


def bench(fn, args, repeats: int) -> float:
    fn(*args)  # warm caches before timing
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=2000,
                    help="coefficient rows (replicas) per call")
    ap.add_argument("--n", type=int, default=5000,
                    help="volume entering the row coefficients")
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    grid, (lnw, a, b, c, l) = node_basis(args.n)
    rows = replica_rows(args.rows, args.n, 1.0, 2.0, args.seed)
    nodes = lnw.size
    print(f"nodes={nodes} rows={args.rows} n={args.n} repeats={args.repeats}")

    py_args = (lnw, a, b, c, l, grid.n_pos, rows)
    t_py = bench(_kernels_py.tilted_logsums, py_args, args.repeats)
    pos_py, neg_py = _kernels_py.tilted_logsums(*py_args)
    print(f"python   tilted_logsums: {t_py * 1e3:9.2f} ms"
          f"  ({args.rows * nodes / t_py / 1e9:.2f} Gnode/s)")

    if _kernels is None:
        print("compiled backend not built; skipping comparison")
        return 0

    t_c = bench(_kernels.tilted_logsums, py_args, args.repeats)
    pos_c, neg_c = _kernels.tilted_logsums(*py_args)
    print(f"compiled tilted_logsums: {t_c * 1e3:9.2f} ms"
          f"  ({args.rows * nodes / t_c / 1e9:.2f} Gnode/s)")
    gap = max(np.max(np.abs(pos_c - pos_py)), np.max(np.abs(neg_c - neg_py)))
    print(f"max backend disagreement: {gap:.3e}")
    print(f"speedup: {t_py / t_c:.2f}x")

    xm_args = (lnw, a, b, c, l, grid.xs, rows)
    t_py2 = bench(_kernels_py.tilted_xmean, xm_args, args.repeats)
    t_c2 = bench(_kernels.tilted_xmean, xm_args, args.repeats)
    lz_py, xm_py = _kernels_py.tilted_xmean(*xm_args)
    lz_c, xm_c = _kernels.tilted_xmean(*xm_args)
    gap2 = max(np.max(np.abs(lz_c - lz_py)), np.max(np.abs(xm_c - xm_py)))
    print(f"python   tilted_xmean:   {t_py2 * 1e3:9.2f} ms")
    print(f"compiled tilted_xmean:   {t_c2 * 1e3:9.2f} ms")
    print(f"max backend disagreement: {gap2:.3e}")
    print(f"speedup: {t_py2 / t_c2:.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
