"""Explicit conservative scheme: face fluxes, stable step size, stepping and runs."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from ..anisotropy import AnisotropyParams
from . import backend
from ._pykernels import stable_dt as _stable_dt
from .exact import TravellingWave
from .grid import Field, Grid, SolverConfig, Trajectory

log = logging.getLogger(__name__)

BC_FIXED, BC_WAVE = 1, 4
ST_OK, ST_NONFINITE, ST_MAXSTEPS, ST_UNSTABLE = 0, 1, 2, 3
Profile = Callable[[np.ndarray, float], np.ndarray]


class StabilityError(ValueError):
    """The requested step exceeds the monotonicity bound."""


class NumericalAbort(RuntimeError):
    """A run produced non-finite values or could not keep a stable step."""

    def __init__(self, message: str, partial: Trajectory | None = None):
        super().__init__(message)
        self.partial = partial


def _check_params(grid: Grid, params: AnisotropyParams) -> None:
    if params.N != grid.N:
        raise ValueError(f"exponents for N={params.N} on a {grid.N}-d grid")
    if min(params.p) < 2.0:
        raise ValueError("the explicit scheme covers p_i >= 2 only")


def _padded3(grid: Grid, vals) -> np.ndarray:
    out = np.zeros(3)
    out[3 - grid.N:] = vals
    return out


class _Workspace:
    """Padded state plus face buffers for one grid."""

    def __init__(self, fld: Field, params: AnisotropyParams, sign: float = 1.0,
                 profile: Profile | None = None):
        g = fld.grid
        _check_params(g, params)
        if g.boundary == "dirichlet-profile" and profile is None:
            raise ValueError("a dirichlet-profile grid needs a boundary profile")
        self.grid = g
        self.w = g.embed(fld.values)
        self.F = g.face_buffers()
        self.p = _padded3(g, params.p)
        self.p[: 3 - g.N] = 2.0
        self.h = _padded3(g, g.spacing)
        self.h[: 3 - g.N] = 1.0
        self.sign = float(sign)
        self.profile = profile
        self.active = [False] * (3 - g.N) + [True] * g.N

    def fill_ghosts(self, t: float) -> None:
        g = self.grid
        if g.boundary == "dirichlet-profile":
            wv = self.w.reshape(tuple(d + 2 for d in g.dims))
            for a in range(g.N):
                for side in (0, 1):
                    vals = np.asarray(self.profile(g.ghost_points(a, side), t), dtype=float)
                    idx = [slice(1, -1)] * g.N
                    idx[a] = slice(0, 1) if side == 0 else slice(-1, None)
                    wv[tuple(idx)] = vals.reshape(wv[tuple(idx)].shape)
        elif g.boundary != "dirichlet-zero":
            backend.kernels().fill_ghosts(self.w, g.boundary_code)

    def fluxes(self, threads: int = 1) -> np.ndarray:
        mx, ok = backend.kernels().fluxes(self.w, self.p, self.h, self.sign, self.F, threads)
        if not ok:
            raise NumericalAbort("non-finite gradient encountered")
        return np.asarray(mx)

    def stable_dt(self, mx, safety: float, floor_: float = 0.0) -> float:
        return _stable_dt(mx, self.p, self.h, safety, floor_, self.active)

    def field(self, t: float) -> Field:
        return Field(self.grid, self.grid.extract(self.w), t)


def face_flux(fld: Field, axis: int, params: AnisotropyParams, include_boundary: bool = False,
              profile: Profile | None = None, sign: float = 1.0) -> np.ndarray:
    """Fluxes ``|D|**(p_i-2) D`` on the faces normal to ``axis``.

    By default only faces between two interior cells are returned (``n_i - 1``
    along ``axis``); ``include_boundary`` adds the two boundary faces computed
    from the grid's ghost closure.
    """
    ws = _Workspace(fld, params, sign, profile)
    ws.fill_ghosts(fld.time)
    ws.fluxes()
    F = ws.F[3 - fld.grid.N + axis].reshape(
        tuple(d + (1 if a == axis else 0) for a, d in enumerate(fld.grid.dims)))
    if include_boundary:
        return F.copy()
    sl = [slice(None)] * fld.grid.N
    sl[axis] = slice(1, -1)
    return F[tuple(sl)].copy()


def adaptive_dt(fld: Field, params: AnisotropyParams, safety: float | None = None,
                config: SolverConfig | None = None, profile: Profile | None = None) -> float:
    """``safety * min_i h_i**2 / (2N (p_i-1) max(|D|, floor)**(p_i-2))`` clamped to the config."""
    config = config or SolverConfig()
    safety = config.safety if safety is None else safety
    ws = _Workspace(fld, params, 1.0, profile)
    ws.fill_ghosts(fld.time)
    dt = ws.stable_dt(ws.fluxes(), safety, config.gradient_floor)
    return float(min(max(dt, config.dt_min), config.dt_max))


def step(fld: Field, dt: float, params: AnisotropyParams, profile: Profile | None = None,
         sign: float = 1.0, threads: int = 1) -> Field:
    """One forward-Euler step; raises :class:`StabilityError` above the safety-1 bound."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    ws = _Workspace(fld, params, sign, profile)
    ws.fill_ghosts(fld.time)
    bound = ws.stable_dt(ws.fluxes(threads), 1.0)
    if dt > bound * (1.0 + 1e-12):
        raise StabilityError(f"dt={dt:.3e} exceeds the stable bound {bound:.3e}")
    backend.kernels().update(ws.w, ws.F, ws.h, dt, threads)
    return ws.field(fld.time + dt)


@dataclass
class RunLog:
    """Per-interval step statistics of one run."""

    backend: str
    intervals: list[dict] = dc_field(default_factory=list)

    @property
    def steps(self) -> int:
        return sum(i["steps"] for i in self.intervals)

    def to_dict(self) -> dict:
        return {"backend": self.backend, "steps": self.steps, "intervals": self.intervals}


def _native_profile(grid: Grid, profile) -> np.ndarray | None:
    if isinstance(profile, TravellingWave) and grid.N == 1:
        h = grid.spacing[0]
        return np.array([profile.amplitude, profile.c, profile.power, grid.origin[0] - 0.5 * h,
                         grid.origin[0] + (grid.dims[0] + 0.5) * h])
    return None


def run(fld: Field, horizon: float, config: SolverConfig, params: AnisotropyParams,
        profile: Profile | None = None) -> Trajectory:
    """Advance ``fld`` to time ``horizon``, recording snapshots.

    Snapshots are taken at the initial time, at every ``config.snapshot_times``
    entry inside ``(fld.time, horizon)`` and at ``horizon``; the step before
    each one is shortened to land on it exactly. The returned trajectory's
    metadata carries the :class:`RunLog`.
    """
    if not horizon >= fld.time:
        raise ValueError("horizon lies before the initial time")
    grid = fld.grid
    ws = _Workspace(fld, params, config.flux_sign, profile)
    kern = backend.kernels()
    targets = [t for t in config.snapshot_times if fld.time < t < horizon] + [horizon]
    targets = sorted(set(targets))
    traj = Trajectory([fld.copy()], {"params": params.to_dict(), "grid": grid.to_dict(),
                                     "config": _config_dict(config)})
    runlog = RunLog(kern.BACKEND)
    native = _native_profile(grid, profile) if grid.boundary == "dirichlet-profile" else None
    bc = grid.boundary_code
    if grid.boundary == "dirichlet-profile":
        bc = BC_WAVE if native is not None else BC_FIXED
    prof = native if native is not None else np.zeros(5)
    t = fld.time
    for target in targets:
        if target <= t:
            continue
        t_start = t
        if grid.boundary == "dirichlet-profile" and native is None:
            status, t, steps, lo, hi = _run_python_profile(ws, kern, t, target, config)
        else:
            status, t, steps, lo, hi = kern.advance(
                ws.w, ws.p, ws.h, ws.sign, bc, prof, t, target, config.safety,
                config.gradient_floor, config.dt_min, config.dt_max,
                config.max_steps - runlog.steps, ws.F, config.threads)
        runlog.intervals.append({"t_start": t_start, "t_end": t, "steps": int(steps),
                                 "dt_min": lo if steps else None,
                                 "dt_max": hi if steps else None})
        if status != ST_OK:
            traj.metadata["runlog"] = runlog.to_dict()
            msg = {ST_NONFINITE: "non-finite values", ST_MAXSTEPS: "step budget exhausted",
                   ST_UNSTABLE: "dt_min exceeds the stable step"}[status]
            raise NumericalAbort(f"run aborted at t={t:.6g} after {runlog.steps} steps: {msg}",
                                 traj)
        vals = grid.extract(ws.w)
        if not np.all(np.isfinite(vals)):
            traj.metadata["runlog"] = runlog.to_dict()
            raise NumericalAbort(f"non-finite values at t={t:.6g}", traj)
        traj.append(Field(grid, vals, t))
        log.debug("snapshot t=%.6g after %d steps", t, steps)
    traj.metadata["runlog"] = runlog.to_dict()
    return traj


def _run_python_profile(ws: _Workspace, kern, t: float, target: float, config: SolverConfig):
    """Stepping loop for arbitrary boundary profiles: ghosts refreshed from Python."""
    steps, lo, hi = 0, math.inf, 0.0
    while t < target:
        ws.fill_ghosts(t)
        status, t, n, a, b = kern.advance(
            ws.w, ws.p, ws.h, ws.sign, BC_FIXED, np.zeros(5), t, target, config.safety,
            config.gradient_floor, config.dt_min, config.dt_max, 1, ws.F, config.threads)
        if status not in (ST_OK, ST_MAXSTEPS):
            return status, t, steps, lo, hi
        steps += n
        lo, hi = min(lo, a), max(hi, b)
        if steps >= config.max_steps and t < target:
            return ST_MAXSTEPS, t, steps, lo, hi
    return ST_OK, t, steps, lo, hi


def _config_dict(config: SolverConfig) -> dict:
    return {"safety": config.safety, "dt_min": config.dt_min, "dt_max": config.dt_max,
            "gradient_floor": config.gradient_floor, "snapshot_times": list(config.snapshot_times),
            "flux_sign": config.flux_sign}
