import warnings

import numpy as np
import pytest

from anisolab import validate_exponents
from anisolab.solver import (Bump, Field, Grid, Trajectory, exact_travelling_wave, random_bumps,
                             weak_residual)

P3 = validate_exponents([3.0])
TW = exact_travelling_wave(3.0, 1.0)
BUMPS = [Bump((1.5,), (1.4,), 0.5, 0.5), Bump((2.0,), (1.0,), 0.3, 0.6)]


def wave_trajectory(n, nt=None):
    g = Grid.uniform([-1.0], [4.0], [n])
    times = np.linspace(0.0, 1.0, nt or n // 2 + 1)
    return Trajectory([Field.from_function(g, TW, t) for t in times])


def test_constant_residual_is_quadrature_error():
    g = Grid.uniform([0, 0], [1, 1], [16, 16])
    bumps = random_bumps(g, (0.0, 1.0), 10, np.random.default_rng(0))
    P = validate_exponents([2.5, 2.5])
    r = []
    for nt in (41, 161, 641):
        traj = Trajectory([Field(g, np.full((16, 16), 2.0), t) for t in np.linspace(0, 1, nt)])
        r.append(weak_residual(traj, bumps, P).relative)
    # only the time quadrature of the bump derivative remains: second order in dt
    assert r[0] / r[1] > 10 and r[1] / r[2] > 10 and r[2] < 1e-5


def test_wave_residual_refines():
    r = [weak_residual(wave_trajectory(n), BUMPS, P3).relative for n in (128, 256, 512)]
    assert r[0] / r[1] >= 3 and r[1] / r[2] >= 3


def test_perturbed_snapshot_detected():
    traj = wave_trajectory(512)
    snaps = list(traj)
    k = len(snaps) // 3
    snaps[k] = snaps[k].scaled(1.1)
    r_bad = weak_residual(Trajectory(snaps), BUMPS, P3).relative
    assert r_bad > 10 * weak_residual(traj, BUMPS, P3).relative


def test_bumps_leaving_domain_skipped():
    traj = wave_trajectory(64)
    outside = Bump((3.9,), (0.5,), 0.5, 0.5)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        rep = weak_residual(traj, BUMPS + [outside], P3)
    assert rep.skipped == 1 and any("leaves the domain" in str(x.message) for x in w)
    with pytest.warns(UserWarning), pytest.raises(ValueError):
        weak_residual(traj, [outside], P3)


def test_random_bumps_fit():
    g = Grid.uniform([-1, 0], [1, 3], [10, 10])
    assert all(b.fits(g) for b in random_bumps(g, (0, 1), 50, np.random.default_rng(1)))
