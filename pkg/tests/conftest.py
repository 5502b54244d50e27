import time

import numpy as np
import pytest

from anisolab import validate_exponents
from anisolab.selfsim import run_until_spread, spike_init
from anisolab.solver import Field, Grid, Trajectory

_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for the acceptance summary."""

    def record(label: str, ok: bool, detail: str = ""):
        line = f"{'PASS' if ok else 'FAIL'} {label}" + (f"  [{detail}]" if detail else "")
        _LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def spike_run():
    """3D spike at p = 2.1 on a 64-cube, evolved until the support fills 40% of the box."""
    params = validate_exponents([2.1, 2.1, 2.1])
    grid = Grid.uniform([-1.0] * 3, [1.0] * 3, [64] * 3, "dirichlet-zero")
    t0 = time.perf_counter()
    traj = run_until_spread(spike_init(grid, 1.0, 3), params)
    traj.metadata["wall_seconds"] = time.perf_counter() - t0
    return traj, params


def constant_trajectory(N=3, value=2.0, n=12, dims=8, times=None):
    grid = Grid.uniform([-1.0] * N, [1.0] * N, [dims] * N, "periodic")
    times = np.linspace(0.0, 1.0, n) if times is None else times
    return Trajectory([Field(grid, np.full(grid.dims, value), float(t)) for t in times])


@pytest.fixture
def const_traj():
    return constant_trajectory()


@pytest.fixture(scope="session")
def harnack_run(spike_run):
    """Harnack probe on the spike run: 2048 vertices, radii over three decades."""
    from anisolab.probes import SampleSpec, harnack_probe
    from anisolab.solver import centroid, support_box

    traj, params = spike_run
    c, sb = centroid(traj[-1]), support_box(traj[-1])
    spec = SampleSpec(n=2048, seed=0, rho_range=(1e-4, 1e-1), x_box=(tuple(c - sb), tuple(c + sb)))
    t0 = time.perf_counter()
    rep = harnack_probe(traj, params, 1.0, 1.0, spec)
    rep.aggregate["wall_seconds"] = time.perf_counter() - t0
    return rep
