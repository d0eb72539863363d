"""Compiled versus numpy kernels on the Monte Carlo hot path.

    python benchmarks/bench_kernels.py [--samples 1000000] [--repeat 5] [--out bench.csv]

Each kernel runs on the same inputs under both backends; results are checked
for agreement before timing.  Reports the best of ``--repeat`` wall times.
"""
import argparse
import csv
import sys
import timeit

import numpy as np

from dfsq import kernels
from dfsq.design import design_mse_fixed_rate
from dfsq.quantizer import build_quantizer
from dfsq.sources import make_source


def _cases(samples, K, rng):
    src = make_source("gaussian")
    q = build_quantizer(design_mse_fixed_rate(src), K)
    x = src.sample(rng, samples)
    b, c = q.boundaries, q.codewords
    gx = x * x
    table = c * c
    return {
        "encode": lambda m: m.encode(b, x),
        "quantize": lambda m: m.quantize(b, c, x),
        "cell_counts": lambda m: m.cell_counts(b, x),
        "table_error_sums": lambda m: m.table_error_sums(gx, b, table, x),
        "error_sums": lambda m: m.error_sums(gx, x),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(np.allclose(u, v, rtol=1e-12, atol=0) for u, v in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b)) or np.allclose(a, b, rtol=1e-12)


def run(samples, repeat, Ks=(16, 256)):
    try:
        fast = kernels.backend_module("cython")
    except ImportError:
        sys.exit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    slow = kernels.backend_module("python")
    rows = []
    for K in Ks:
        for name, fn in _cases(samples, K, np.random.default_rng(0)).items():
            if not _same(fn(fast), fn(slow)):
                raise SystemExit(f"{name} K={K}: backends disagree")
            t_fast = min(timeit.repeat(lambda: fn(fast), number=1, repeat=repeat))
            t_slow = min(timeit.repeat(lambda: fn(slow), number=1, repeat=repeat))
            rows.append({"kernel": name, "K": K, "samples": samples, "cython_s": t_fast,
                         "python_s": t_slow, "speedup": t_slow / t_fast})
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--out")
    args = p.parse_args(argv)
    rows = run(args.samples, args.repeat)
    print(f"{'kernel':18s} {'K':>4s} {'cython ms':>10s} {'python ms':>10s} {'speedup':>8s}")
    for r in rows:
        print(f"{r['kernel']:18s} {r['K']:4d} {1e3 * r['cython_s']:10.2f} "
              f"{1e3 * r['python_s']:10.2f} {r['speedup']:8.2f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
