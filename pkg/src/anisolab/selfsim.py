"""Source-type runs and power-law fits of their decay and spreading.

A narrow bump evolves until its thresholded support covers a set fraction
of the box. The sup-norm is then fitted to ``sigma (t - t_v)**(-alpha)``
with a free virtual origin ``t_v``, and the support half-widths to
``(t - t_v)**alpha_i`` with the same origin.
"""
from __future__ import annotations

import csv
import io as _io
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .anisotropy import AnisotropyParams
from .solver import (Field, Grid, SolverConfig, Trajectory, adaptive_dt, mass, run, sup,
                     support_box, touches_boundary)
from .solver.io import dumps

MIN_POINTS = 8
SELF_SIMILAR_RMS = 0.02


class FitError(ValueError):
    pass


def spike_init(grid: Grid, total_mass: float, width_cells: float) -> Field:
    """Tensor bump ``prod (1 - s_i**2)**3`` at the grid centre carrying ``total_mass``.

    ``s_i`` is the offset along axis ``i`` in units of ``width_cells`` cells.
    """
    if width_cells < 2:
        raise ValueError("width_cells must be at least 2")
    if not total_mass > 0:
        raise ValueError("total_mass must be positive")
    if any(2 * width_cells >= d for d in grid.dims):
        raise ValueError(f"a bump of {width_cells} cells does not fit in {grid.dims}")
    c = 0.5 * (grid.lo + grid.hi)
    parts = []
    for a, x in enumerate(grid.axes()):
        s = (x - c[a]) / (width_cells * grid.spacing[a])
        parts.append(np.where(np.abs(s) < 1, (1 - s * s) ** 3, 0.0))
    u = parts[0]
    for b in parts[1:]:
        u = np.multiply.outer(u, b)
    u = u * (total_mass / (u.sum() * grid.cell_volume))
    return Field(grid, u, 0.0)


# -- fitting --------------------------------------------------------------------------
@dataclass
class PowerFit:
    """``y = amp * (t - t_v)**slope``."""

    slope: float
    amp: float
    t_v: float
    rms: float
    n: int

    def __call__(self, t):
        return self.amp * (np.asarray(t) - self.t_v) ** self.slope


def _linear_fit(logt, logy):
    A = np.vstack([np.ones_like(logt), logt]).T
    coef, *_ = np.linalg.lstsq(A, logy, rcond=None)
    r = logy - A @ coef
    return coef, float(np.sqrt(np.mean(r * r)))


def fit_power_law(t, y, t_v: float | None = 0.0) -> PowerFit:
    """Least-squares fit of ``log y`` against ``log(t - t_v)``.

    With ``t_v=None`` the origin is fitted too: a log-spaced profile scan
    over ``t_min - t_v`` seeds a three-parameter least-squares polish.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < MIN_POINTS:
        raise FitError(f"need at least {MIN_POINTS} points, got {t.size}")
    if np.any(y <= 0):
        raise FitError("power-law fits need positive data")
    logy = np.log(y)
    if t_v is not None:
        if np.any(t <= t_v):
            raise FitError("times must exceed the origin")
        (c0, c1), rms = _linear_fit(np.log(t - t_v), logy)
        return PowerFit(float(c1), float(math.exp(c0)), float(t_v), rms, t.size)

    tmin, span = t.min(), t.max() - t.min()
    scale = max(span, abs(t.max()))
    offsets = np.geomspace(1e-6 * scale, 1e3 * scale, 241)
    best = min(offsets, key=lambda d: _linear_fit(np.log(t - tmin + d), logy)[1])
    (c0, c1), _ = _linear_fit(np.log(t - tmin + best), logy)

    def resid(z):
        return z[0] + z[1] * np.log(t - tmin + np.exp(z[2])) - logy

    sol = least_squares(resid, [c0, c1, math.log(best)], xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        max_nfev=2000)
    c0, c1, ld = sol.x
    t_v = float(tmin - math.exp(ld))
    rms = float(np.sqrt(np.mean(sol.fun ** 2)))
    return PowerFit(float(c1), float(math.exp(c0)), t_v, rms, t.size)


def _window(traj: Trajectory, window):
    times = traj.times
    if window is None:
        window = (times[-1] / 10.0, times[-1])
    lo, hi = window
    idx = [i for i, t in enumerate(times) if lo <= t <= hi]
    return idx, (float(lo), float(hi))


@dataclass
class SupFit:
    alpha: float
    sigma: float
    t_v: float
    rms: float
    n: int


def fit_sup_decay(traj: Trajectory, window=None, fit_origin: bool = True) -> SupFit:
    """Negated log-log slope of ``sup u`` in the window (default ``[t_end/10, t_end]``)."""
    idx, _ = _window(traj, window)
    t = traj.times[idx]
    s = np.array([sup(traj[i]) for i in idx])
    if len(idx) < MIN_POINTS:
        raise FitError(f"need at least {MIN_POINTS} snapshots in the window, got {len(idx)}")
    if np.any(s <= 0):
        raise FitError("sup vanishes inside the window")
    f = fit_power_law(t, s, None if fit_origin else 0.0)
    return SupFit(-f.slope, f.amp, f.t_v, f.rms, f.n)


@dataclass
class SupportFit:
    alpha_i: list[float]
    rms: list[float]
    halfwidths: list[list[float]]
    times: list[float]


def fit_support_slopes(traj: Trajectory, eps_rel: float = 1e-3, window=None,
                       t_v: float = 0.0) -> SupportFit:
    """Per-axis slopes of the thresholded support half-widths against ``t - t_v``."""
    idx, _ = _window(traj, window)
    if len(idx) < MIN_POINTS:
        raise FitError(f"need at least {MIN_POINTS} snapshots in the window, got {len(idx)}")
    for i in idx:
        if touches_boundary(traj[i], eps_rel):
            raise FitError(f"support reaches the boundary at snapshot {i} (t={traj[i].time:.6g})")
    t = traj.times[idx]
    W = np.array([support_box(traj[i], eps_rel) for i in idx])
    slopes, rms = [], []
    for a in range(W.shape[1]):
        f = fit_power_law(t, W[:, a], t_v)
        slopes.append(f.slope)
        rms.append(f.rms)
    return SupportFit(slopes, rms, W.tolist(), t.tolist())


def positivity_eta(traj: Trajectory, params: AnisotropyParams, window=None,
                   fit: SupFit | None = None, tol: float = 1e-6) -> float:
    """Largest ``eta`` in (0, 1) with ``u >= eta sigma (t-t_v)**-alpha`` on the box
    ``|x_i - c_i| <= eta sigma**((p_i-2)/p_i) (t-t_v)**alpha_i`` at every window snapshot.

    ``sigma``, ``t_v`` and ``alpha`` come from the sup fit, the exponents
    ``alpha_i`` from the theory. The box always keeps the cell nearest to the
    centre so that the test never becomes vacuous. Returns 0 when no ``eta``
    passes.
    """
    idx, _ = _window(traj, window)
    if not idx or all(sup(traj[i]) <= 0 for i in idx):
        return 0.0
    if fit is None:
        fit = fit_sup_decay(traj, window)
    if not fit.sigma > 0:
        return 0.0
    p = params.p_array
    ai = np.asarray(params.alpha_i)
    grid = traj.grid
    c = 0.5 * (grid.lo + grid.hi)
    axes = grid.axes()
    h = np.asarray(grid.spacing)
    reach = fit.sigma ** ((p - 2) / p)

    def holds(eta: float) -> bool:
        for i in idx:
            s = traj[i]
            tau = s.time - fit.t_v
            if tau <= 0:
                return False
            half = np.maximum(eta * reach * tau**ai, 0.5 * h)
            masks = [np.abs(x - c[a]) <= half[a] for a, x in enumerate(axes)]
            block = s.values[np.ix_(*masks)]
            if block.size == 0 or block.min() < eta * fit.sigma * tau ** (-fit.alpha):
                return False
        return True

    lo, hi = 0.0, 1.0
    if holds(hi):
        return 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return lo


# -- orchestration --------------------------------------------------------------------
def support_fraction(fld: Field, eps_rel: float = 1e-3) -> float:
    """Largest ratio of support half-width to domain half-width over the axes."""
    half = 0.5 * (fld.grid.hi - fld.grid.lo)
    return float(np.max(support_box(fld, eps_rel) / half))


def run_until_spread(fld: Field, params: AnisotropyParams, frac: float = 0.4,
                     eps_rel: float = 1e-3, growth: float = 1.05,
                     config: SolverConfig | None = None, t_first: float | None = None,
                     max_snapshots: int = 2000) -> Trajectory:
    """Evolve with geometrically spaced snapshots until the support fraction reaches ``frac``.

    The snapshot that first exceeds ``frac`` is dropped, so every kept
    snapshot satisfies the bound.
    """
    config = config or SolverConfig()
    if t_first is None:
        t_first = fld.time + 2.0 * adaptive_dt(fld, params, config=config)
    traj = Trajectory([fld.copy()], {"params": params.to_dict()})
    steps = []
    cur, t = fld, t_first
    for _ in range(max_snapshots):
        seg = run(cur, t, config, params)
        cur = seg[-1]
        steps.extend(seg.metadata["runlog"]["intervals"])
        if support_fraction(cur, eps_rel) > frac or touches_boundary(cur, eps_rel):
            break
        traj.append(cur)
        t = fld.time + (t - fld.time) * growth
    else:
        raise RuntimeError("support never reached the requested fraction")
    traj.metadata["runlog"] = {"intervals": steps, "steps": sum(s["steps"] for s in steps)}
    traj.metadata["grid"] = fld.grid.to_dict()
    return traj


@dataclass
class ScalingReport:
    alpha_hat: float
    alpha_i_hat: list[float]
    eta_hat: float
    sigma_hat: float
    t_v: float
    window: list[float]
    sup_rms: float
    support_rms: list[float]
    self_similar: bool
    eps_rel: float
    eps_sensitivity: dict
    theory: dict
    max_support_fraction: float
    mass_drift: float
    params: dict
    n_snapshots: int
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return dumps(self.to_dict())


def scaling_report(traj: Trajectory, params: AnisotropyParams, eps_rel: float = 1e-3,
                   window=None, eps_grid=(1e-4, 1e-3, 1e-2)) -> ScalingReport:
    idx, win = _window(traj, window)
    sf = fit_sup_decay(traj, win)
    supp = fit_support_slopes(traj, eps_rel, win, sf.t_v)
    sens = {}
    for e in eps_grid:
        try:
            sens[f"{e:g}"] = fit_support_slopes(traj, e, win, sf.t_v).alpha_i
        except FitError as exc:
            sens[f"{e:g}"] = str(exc)
    eta = positivity_eta(traj, params, win, sf)
    fracs = [support_fraction(traj[i], eps_rel) for i in idx]
    m0 = mass(traj[0])
    drift = max(abs(mass(s) - m0) for s in traj) / m0 if m0 else 0.0
    rms_ok = sf.rms < SELF_SIMILAR_RMS and all(r < SELF_SIMILAR_RMS for r in supp.rms)
    notes = [] if rms_ok else ["fit residual above threshold: transient not left"]
    if max(fracs) > 0.4:
        notes.append("support exceeded 40% of the domain half-width inside the window")
    return ScalingReport(
        alpha_hat=sf.alpha, alpha_i_hat=supp.alpha_i, eta_hat=eta, sigma_hat=sf.sigma,
        t_v=sf.t_v, window=list(win), sup_rms=sf.rms, support_rms=supp.rms,
        self_similar=bool(rms_ok), eps_rel=eps_rel, eps_sensitivity=sens,
        theory={"alpha": params.alpha, "alpha_i": list(params.alpha_i),
                "sum_alpha_i_hat": float(sum(supp.alpha_i))},
        max_support_fraction=float(max(fracs)), mass_drift=float(drift),
        params=params.to_dict(), n_snapshots=len(idx), notes=notes)


def series_csv(traj: Trajectory, eps_rel: float = 1e-3) -> str:
    """CSV with columns ``t, sup, halfwidth_1..N``."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    N = traj.grid.N
    w.writerow(["t", "sup"] + [f"halfwidth_{i + 1}" for i in range(N)])
    for s in traj:
        w.writerow([repr(s.time), repr(sup(s))] + [repr(float(v)) for v in support_box(s, eps_rel)])
    return buf.getvalue()


PLOT_SCRIPT = '''"""Log-log plots of the self-similar run; reads {csv} next to this file."""
import csv
import pathlib

import matplotlib.pyplot as plt

here = pathlib.Path(__file__).resolve().parent
rows = list(csv.DictReader(open(here / "{csv}")))
t = [float(r["t"]) for r in rows]
fig, (a, b) = plt.subplots(1, 2, figsize=(10, 4))
a.loglog(t[1:], [float(r["sup"]) for r in rows][1:], "o-")
a.set_xlabel("t")
a.set_ylabel("sup u")
for key in [k for k in rows[0] if k.startswith("halfwidth")]:
    b.loglog(t[1:], [float(r[key]) for r in rows][1:], "o-", label=key)
b.set_xlabel("t")
b.legend()
fig.tight_layout()
fig.savefig(here / "scaling.png", dpi=120)
'''


def write_outputs(directory, report: ScalingReport, traj: Trajectory,
                  eps_rel: float = 1e-3) -> dict:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = {"report": d / "scaling_report.json", "series": d / "scaling_series.csv",
             "plot": d / "plot_scaling.py"}
    files["report"].write_text(report.to_json())
    files["series"].write_text(series_csv(traj, eps_rel))
    files["plot"].write_text(PLOT_SCRIPT.format(csv=files["series"].name))
    return {k: str(v) for k, v in files.items()}
