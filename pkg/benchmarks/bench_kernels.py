"""Compare the compiled kernels with the numpy fallback.

Each case advances the same initial data by a fixed number of explicit steps
with both backends, checks that the results agree, and reports wall time per
step. Usage::

    python benchmarks/bench_kernels.py [--steps 200] [--repeat 3] [--threads 1] [--json out.json]
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from anisolab import validate_exponents
from anisolab.selfsim import spike_init
from anisolab.solver import (Field, Grid, SolverConfig, adaptive_dt, backend,
                             exact_travelling_wave, run)

CASES = {
    "wave-1d-4096": dict(p=[3.0], lo=[-1.0], hi=[4.0], dims=[4096], bc="dirichlet-profile"),
    "spike-2d-256": dict(p=[2.3, 2.6], lo=[-1.0] * 2, hi=[1.0] * 2, dims=[256] * 2,
                         bc="dirichlet-zero"),
    "spike-3d-48": dict(p=[2.1, 2.2, 2.3], lo=[-1.0] * 3, hi=[1.0] * 3, dims=[48] * 3,
                        bc="dirichlet-zero"),
    "periodic-3d-64": dict(p=[2.5, 3.0, 3.5], lo=[0.0] * 3, hi=[1.0] * 3, dims=[64] * 3,
                           bc="periodic"),
}


def _setup(case):
    params = validate_exponents(case["p"])
    grid = Grid.uniform(case["lo"], case["hi"], case["dims"], case["bc"])
    profile = None
    if case["bc"] == "dirichlet-profile":
        profile = exact_travelling_wave(case["p"][0], 1.0)
        fld = Field.from_function(grid, profile, 0.0)
    elif case["bc"] == "periodic":
        x = grid.mesh()
        fld = Field(grid, 1.0 + 0.5 * np.prod(np.sin(2 * np.pi * x), axis=-1))
    else:
        fld = spike_init(grid, 1.0, 4.0)
    return params, fld, profile


def time_case(case, kernel: str, steps: int, repeat: int, threads: int = 1):
    """Seconds per step and final values for a run of roughly ``steps`` steps."""
    params, fld, profile = _setup(case)
    backend.use(kernel)
    cfg = SolverConfig(safety=0.4, threads=threads)
    horizon = steps * adaptive_dt(fld, params, config=cfg, profile=profile)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        traj = run(fld, horizon, cfg, params, profile)
        best = min(best, time.perf_counter() - t0)
    n = traj.metadata["runlog"]["steps"]
    return best / n, traj[-1].values


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1, help="OpenMP threads (compiled only)")
    ap.add_argument("--cases", nargs="*", default=list(CASES))
    ap.add_argument("--json", help="write results to this file")
    args = ap.parse_args(argv)
    kinds = backend.available()
    rows = []
    print(f"{'case':<16}" + "".join(f"{k + ' us/step':>20}" for k in kinds) + f"{'speedup':>10}")
    for name in args.cases:
        res = {k: time_case(CASES[name], k, args.steps, args.repeat, args.threads) for k in kinds}
        row = {"case": name, "steps": args.steps, "threads": args.threads,
               **{f"{k}_s_per_step": res[k][0] for k in kinds}}
        if len(kinds) == 2:
            row["speedup"] = res["python"][0] / res["compiled"][0]
            a, b = res["compiled"][1], res["python"][1]
            row["max_rel_diff"] = float(np.abs(a - b).max() / np.abs(a).max())
        rows.append(row)
        line = f"{name:<16}" + "".join(f"{res[k][0] * 1e6:>20.1f}" for k in kinds)
        print(line + (f"{row['speedup']:>10.1f}  diff {row['max_rel_diff']:.1e}"
                      if "speedup" in row else ""))
    backend.use(None)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)
    return rows


if __name__ == "__main__":
    main()
