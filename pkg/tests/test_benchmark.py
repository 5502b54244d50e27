import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "benchmarks"))

import bench_kernels  # noqa: E402
from anisolab.solver import backend  # noqa: E402


def test_time_case_runs_each_backend():
    for kind in backend.available():
        per_step, values = bench_kernels.time_case(bench_kernels.CASES["wave-1d-4096"], kind, 5, 1)
        assert per_step > 0 and np.all(np.isfinite(values))
    backend.use(None)


def test_main_reports_agreement(tmp_path):
    out = tmp_path / "bench.json"
    rows = bench_kernels.main(["--cases", "wave-1d-4096", "--steps", "5", "--repeat", "1",
                               "--json", str(out)])
    assert out.exists() and rows[0]["case"] == "wave-1d-4096"
    if "speedup" in rows[0]:
        assert rows[0]["max_rel_diff"] < 1e-12
