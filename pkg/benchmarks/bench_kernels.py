"""Benchmark the compiled integrator core against the pure-numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--horizon 20000] [--repeats 3]

Runs the same seeded switching-topology workload through both kernels and
prints per-step cost and speedup. The two must agree to 1e-12; this script
asserts it.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from flockswitch.dynamics import CommunicationWeight, Configuration, StopCriteria, simulate
from flockswitch.graph import Digraph, TopologyEnsemble
from flockswitch.kernels import HAVE_COMPILED
from flockswitch.switching import GeometricDwelling, generate_schedule


def ring_ensemble(n):
    cycle = [(i, (i + 1) % n) for i in range(n)]
    third = max(1, n // 3)
    pieces = [cycle[i : i + third] for i in range(0, n, third)]
    return TopologyEnsemble.uniform([Digraph.from_edges(n, p) for p in pieces])


def run_case(n, d, horizon, weight, kernel, seed=7):
    rng = np.random.Generator(np.random.PCG64(seed))
    ens = ring_ensemble(n)
    sched = generate_schedule(ens, GeometricDwelling(0.9), horizon, seed)
    init = Configuration(rng.random((n, d)), rng.random((n, d)))
    t0 = time.perf_counter()
    traj = simulate(init, ens, sched, 0.1, weight, horizon,
                    StopCriteria(v_tol=-1.0, x_cap=np.inf), kernel=kernel)
    return time.perf_counter() - t0, traj


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--horizon", type=int, default=20_000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    if not HAVE_COMPILED:
        print("compiled kernel not built: rerun `pip install -e . --no-build-isolation`")
        return 1

    cases = [
        (5, 2, CommunicationWeight.constant(1.0), "constant"),
        (5, 2, CommunicationWeight.power_law(1.0, 0.5), "power_law"),
        (20, 3, CommunicationWeight.constant(1.0), "constant"),
        (50, 3, CommunicationWeight.power_law(1.0, 0.5), "power_law"),
    ]
    print(f"{'N':>4} {'d':>2} {'weight':>10} {'python us/step':>15} "
          f"{'compiled us/step':>17} {'speedup':>8}")
    for n, d, w, label in cases:
        best = {}
        for kernel in ("python", "compiled"):
            times = []
            for _ in range(args.repeats):
                dt, traj = run_case(n, d, args.horizon, w, kernel)
                times.append(dt)
            best[kernel] = min(times), traj
        t_py, traj_py = best["python"]
        t_c, traj_c = best["compiled"]
        assert np.abs(traj_py.dv - traj_c.dv).max() <= 1e-12, "kernels disagree"
        us = 1e6 / args.horizon
        print(f"{n:>4} {d:>2} {label:>10} {t_py * us:>15.2f} "
              f"{t_c * us:>17.2f} {t_py / t_c:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
