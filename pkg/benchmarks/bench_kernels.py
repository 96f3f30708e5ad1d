"""Compiled vs pure-Python kernels: algebraic solve, stability grid, full run.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import math
import time
from dataclasses import replace

import numpy as np

from gfl_lvrt import _pykernels
from gfl_lvrt.cases import case2_like

try:
    from gfl_lvrt import _ckernels
except ImportError:
    _ckernels = None


def _solve_args(n):
    rng = np.random.default_rng(0)
    deltas = rng.uniform(-math.pi, math.pi, n)
    # reduced two-bus network with the impedance load, traditional law
    return [(1, 0.9214, -0.3544, 0.0644, 0.3675, float(d), 1.0, float(d),
             1.2, 1.5, 0.9, 0.8, 0.0, 1e-8, 50) for d in deltas]


def bench_solve(mod, args):
    t0 = time.perf_counter()
    for a in args:
        mod.solve_loop(*a)
    return time.perf_counter() - t0


def bench_grid(mod, n_delta, n_omega):
    off = [float(v) for v in np.radians(np.linspace(-180, 180, n_delta))]
    om = [float(v) for v in np.linspace(-50, 50, n_omega)]
    z = complex(0.0644, 0.3675)
    t0 = time.perf_counter()
    mod.stability_grid(0.9214, -0.3544, z.real, z.imag, 1.2, 1.5, 0.9, 0.8, 0.0, 0.01, 1,
                       20.0, 500.0, 0.3, 0.99, off, om, 1e-3, 500, math.radians(2), 0.1)
    return time.perf_counter() - t0


def bench_sim():
    from gfl_lvrt import kernels, simulator
    # without the current lag every stage goes through the algebraic loop
    scn = case2_like(t_end=0.5)
    scn = replace(scn, control=replace(scn.control, tau_c=0.0))
    out = {}
    for name, mod in (("python", _pykernels), ("cython", _ckernels)):
        if mod is None:
            continue
        saved = kernels.solve_loop
        kernels.solve_loop = mod.solve_loop
        try:
            t0 = time.perf_counter()
            simulator.simulate(scn)
            out[name] = time.perf_counter() - t0
        finally:
            kernels.solve_loop = saved
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n-solve", type=int, default=20000)
    a = ap.parse_args()
    args = _solve_args(a.n_solve)
    mods = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    rows = []
    for name, mod in mods:
        ts = min(bench_solve(mod, args) for _ in range(a.repeat))
        tg = min(bench_grid(mod, 37, 11) for _ in range(a.repeat))
        rows.append((name, ts / len(args) * 1e6, tg))
    print(f"{'backend':8s} {'solve_loop (us/call)':>22s} {'stability_grid 37x11 (s)':>26s}")
    for name, us, tg in rows:
        print(f"{name:8s} {us:22.2f} {tg:26.3f}")
    if len(rows) == 2:
        print(f"speed-up: solve_loop x{rows[0][1] / rows[1][1]:.1f}, "
              f"stability_grid x{rows[0][2] / rows[1][2]:.1f}")
    sim = bench_sim()
    print("simulate(case2_like, 0.5 s, tau_c=0): " + ", ".join(f"{k} {v:.2f} s" for k, v in sim.items()))
    if _ckernels is None:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
