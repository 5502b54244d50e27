"""Weak-form residual of a trajectory against smooth tensor-product bumps.

For a test function ``phi`` the residual is

    [int u phi dx]_{t_a}^{t_b} + int int (-u phi_t + sum_i F_i d_i phi) dx dt

with ``F_i = |d_i u|**(p_i-2) d_i u`` taken on cell faces. Space uses the
midpoint rule (faces for the flux term), time the trapezoid rule over the
snapshots. The bumps are ``(1 - s**2)**3`` along every axis and in time.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy.integrate import trapezoid

from ..anisotropy import AnisotropyParams
from .grid import Grid, Trajectory
from .scheme import face_flux


@dataclass(frozen=True)
class Bump:
    center: tuple[float, ...]
    widths: tuple[float, ...]
    t_center: float
    t_width: float

    def fits(self, grid: Grid) -> bool:
        c, w = np.asarray(self.center), np.asarray(self.widths)
        return bool(np.all(c - w >= grid.lo) and np.all(c + w <= grid.hi))


def _b(s):
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < 1, (1 - s * s) ** 3, 0.0)


def _db(s):
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < 1, -6 * s * (1 - s * s) ** 2, 0.0)


def random_bumps(grid: Grid, t_range: tuple[float, float], n: int, rng: np.random.Generator,
                 width_frac: tuple[float, float] = (0.15, 0.45)) -> list[Bump]:
    """Bumps with spatial support strictly inside the grid and time support
    that usually sticks out of ``t_range`` so the endpoint terms are exercised."""
    lo, hi = grid.lo, grid.hi
    L = hi - lo
    t0, t1 = t_range
    out = []
    for _ in range(n):
        w = rng.uniform(*width_frac, size=grid.N) * L
        c = rng.uniform(lo + w, hi - w)
        tc = rng.uniform(t0, t1)
        tw = rng.uniform(0.3, 1.0) * (t1 - t0)
        out.append(Bump(tuple(c), tuple(w), float(tc), float(tw)))
    return out


@dataclass
class ResidualReport:
    raw: float
    relative: float
    per_test: list[float] = field(default_factory=list)
    scales: list[float] = field(default_factory=list)
    skipped: int = 0

    def __float__(self) -> float:
        return self.raw

    def to_dict(self) -> dict:
        return {"raw": self.raw, "relative": self.relative, "per_test": self.per_test,
                "skipped": self.skipped}


def weak_residual(traj: Trajectory, test_set: list[Bump], params: AnisotropyParams) -> ResidualReport:
    """Maximum weak residual over ``test_set``; bumps leaving the grid are skipped."""
    if len(traj) < 2:
        raise ValueError("the weak residual needs at least two snapshots")
    grid = traj.grid
    times = traj.times
    fluxes = [[face_flux(s, a, params) for a in range(grid.N)] for s in traj]
    vals = traj.stack()
    vol = grid.cell_volume
    xs = grid.axes()
    faces = [0.5 * (x[1:] + x[:-1]) for x in xs]

    res, scales, skipped = [], [], 0
    for bump in test_set:
        if not bump.fits(grid):
            warnings.warn(f"bump at {bump.center} leaves the domain; skipped", stacklevel=2)
            skipped += 1
            continue
        c, w = bump.center, bump.widths
        bx = [_b((x - c[a]) / w[a]) for a, x in enumerate(xs)]
        phi_x = reduce(np.multiply.outer, bx)
        # d_a phi on faces normal to a, cell centres elsewhere
        dphi = []
        for a in range(grid.N):
            parts = [bx[b] if b != a else _db((faces[a] - c[a]) / w[a]) / w[a]
                     for b in range(grid.N)]
            dphi.append(reduce(np.multiply.outer, parts))
        st = (times - bump.t_center) / bump.t_width
        phi_t, dphi_t = _b(st), _db(st) / bump.t_width

        g_signed = np.empty(len(times))
        g_abs = np.empty(len(times))
        for n in range(len(times)):
            u_phi = np.sum(vals[n] * phi_x) * vol
            flux = sum(np.sum(fluxes[n][a] * dphi[a]) for a in range(grid.N)) * vol
            g_signed[n] = -u_phi * dphi_t[n] + flux * phi_t[n]
            g_abs[n] = (abs(u_phi * dphi_t[n])
                        + sum(abs(np.sum(fluxes[n][a] * dphi[a])) for a in range(grid.N))
                        * vol * phi_t[n])
        ends = [np.sum(vals[i] * phi_x) * vol * phi_t[i] for i in (0, -1)]
        r = ends[1] - ends[0] + trapezoid(g_signed, times)
        res.append(float(abs(r)))
        scales.append(float(abs(ends[0]) + abs(ends[1]) + trapezoid(g_abs, times)))
    if not res:
        raise ValueError("every test function left the domain")
    k = int(np.argmax(res))
    rel = res[k] / scales[k] if scales[k] > 0 else 0.0
    return ResidualReport(res[k], float(rel), res, scales, skipped)
