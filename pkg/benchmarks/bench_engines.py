#!/usr/bin/env python3
"""Benchmark the compiled kernel against the NumPy fallback.

Runs a short slice of each shipped scenario on both backends and reports
steps/second plus the speedup.  Usage:

    python3 benchmarks/bench_engines.py [--steps 2000]
"""
import argparse
import time

from formlearn import engine
from formlearn.config import RunConfig, builtin_config, load_scenario
from formlearn.sim import run_scenario


def bench(name: str, n_steps: int) -> None:
    sc = load_scenario(builtin_config(name))
    dt = sc.run.dt
    rc = RunConfig(dt=dt, t_end=n_steps * dt, log_stride=max(1, n_steps // 10))
    print(f"\n{name}: {n_steps} steps of dt={dt:g} "
          f"(state length {2*sc.n + sc.N*(4*sc.n + sc.n*sc.grid.n_units)})")
    base = None
    for backend in ("python", "compiled") if engine.HAVE_COMPILED else ("python",):
        t0 = time.perf_counter()
        res = run_scenario(sc, run_cfg=rc, backend_name=backend)
        dt_wall = time.perf_counter() - t0
        rate = n_steps / dt_wall
        speed = f"  ({base / dt_wall:.1f}x vs python)" if base is not None else ""
        base = base or dt_wall
        print(f"  {backend:>8}: {dt_wall:7.2f} s  {rate:9.0f} steps/s  status={res.status}{speed}")
    if not engine.HAVE_COMPILED:
        print("  (compiled backend not built; pip install -e . builds it)")


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=2000)
    args = ap.parse_args()
    for name in ("paper_siv", "synthetic_learning"):
        bench(name, args.steps)


if __name__ == "__main__":
    main()
