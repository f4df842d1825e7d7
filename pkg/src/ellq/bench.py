"""Benchmark the compiled RK4 core against the numpy fallback.

Run ``python3 -m ellq.bench [--sizes 16,32] [--t-max 2] [--repeat 3] [--out bench.csv]``.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from ellq import kernels
from ellq.cases import rhs_case
from ellq.dynamics import DEFAULT_THETA, evolve, init_cold, time_step
from ellq.fem import assemble_system

COLUMNS = ["backend", "n", "steps", "seconds", "us_per_step", "speedup", "max_abs_diff"]


def bench(sizes=(16, 32), t_max=2.0, repeat=3, theta=DEFAULT_THETA) -> list[dict]:
    rows = []
    for n in sizes:
        system = assemble_system(n, rhs_case("III"))
        start = init_cold(system)
        steps = int(np.ceil(t_max / time_step(system, theta)))
        timings, finals = {}, {}
        for name in kernels.available_backends():
            best = float("inf")
            for _ in range(repeat):
                tic = time.perf_counter()
                finals[name] = evolve(system, start, t_max, theta=theta, backend=name).z
                best = min(best, time.perf_counter() - tic)
            timings[name] = best
        ref = timings["python"]
        for name, sec in timings.items():
            rows.append({
                "backend": name, "n": n, "steps": steps, "seconds": sec,
                "us_per_step": 1e6 * sec / steps, "speedup": ref / sec,
                "max_abs_diff": float(np.max(np.abs(finals[name] - finals["python"]))),
            })
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="python3 -m ellq.bench", description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="16,32")
    parser.add_argument("--t-max", dest="t_max", type=float, default=2.0)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--out", default=None, help="CSV path (stdout only if omitted)")
    args = parser.parse_args(argv)
    rows = bench(tuple(int(v) for v in args.sizes.split(",")), args.t_max, args.repeat)
    for r in rows:
        print(f"{r['backend']:>7s} n={r['n']:<3d} steps={r['steps']:<6d} {r['us_per_step']:8.1f} us/step "
              f"speedup x{r['speedup']:.2f} diff={r['max_abs_diff']:.1e}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
