"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3] [--paths 100000]

Prints one row per workload with the best-of-N wall time for each backend,
the speed-up, and whether the two backends returned identical numbers.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from genthiele import backend
from genthiele.discrete import DiscreteModel, solve_reserves_discrete
from genthiele.duration import default_rates, disability_model, solve_disability
from genthiele.model import ACTIVE, Discount, PaymentSpec, disabled
from genthiele.simulator import simulate_disability_pv


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def term_model():
    return DiscreteModel(2, lambda t, i, j: 0.01 if (i, j) == (0, 1) else 0.0,
                         PaymentSpec(transition=lambda t, g, h: 1.0 if h.index == 1 else 0.0), Discount(0.03))


def workloads(paths):
    rates = default_rates(30)
    prod = disability_model(rates, 0.03, 67, 30).fast_path
    model = term_model()
    return [
        ("disability sweep dt=1/12, full surface",
         lambda k: solve_disability(rates, 0.03, 67, 30, 1 / 12, keep_surface=True, backend=k).active),
        ("disability sweep dt=1/360, streaming",
         lambda k: solve_disability(rates, 0.03, 67, 30, 1 / 360, keep_surface=False, backend=k).active),
        ("discrete sweep 2 states dt=1/3650",
         lambda k: solve_reserves_discrete(model, [0, 0], 0, 20, 1 / 3650, backend=k).values),
        (f"disability MC {paths} paths from active",
         lambda k: simulate_disability_pv(prod, ACTIVE, 30.0, paths, 1, backend=k, workers=1, keep_pvs=True).pvs),
        (f"disability MC {paths} paths from disabled@30",
         lambda k: simulate_disability_pv(prod, disabled(30.0), 30.0, paths, 1, backend=k, workers=1,
                                          keep_pvs=True).pvs),
    ]


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--paths", type=int, default=100_000)
    args = p.parse_args(argv)
    names = backend.available()
    if "cython" not in names:
        print("compiled kernels not built; only the fallback is available")
    mods = {n: backend.load(n) for n in names}
    print(f"{'workload':<44} {'python s':>10} {'cython s':>10} {'speed-up':>9}  identical")
    for label, fn in workloads(args.paths):
        times, outs = {}, {}
        for n, mod in mods.items():
            times[n], outs[n] = best_of(lambda: fn(mod), args.repeat)
        if "cython" in times:
            same = np.array_equal(outs["python"], outs["cython"])
            print(f"{label:<44} {times['python']:>10.3f} {times['cython']:>10.3f} "
                  f"{times['python'] / times['cython']:>8.1f}x  {same}")
        else:
            print(f"{label:<44} {times['python']:>10.3f} {'-':>10} {'-':>9}  -")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
