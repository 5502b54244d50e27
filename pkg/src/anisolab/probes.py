"""Empirical checks of pointwise estimates on computed trajectories.

Every probe draws its sample points from a scrambled Sobol sequence with a
recorded seed, evaluates the solution by multilinear interpolation in space
and linear interpolation in time, and reports the smallest constant that
makes the estimate hold at each admissible sample.

The trajectory's space-time box (cell centres times the recorded time span)
plays the role of ``Omega x [-T, T]``: ``T`` is half the time span and
``T - |t_o|`` becomes the distance of ``t_o`` to the nearer time end.
"""
from __future__ import annotations

import csv
import io as _io
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import qmc

from .anisotropy import AnisotropyParams
from .geometry import (GeometryError, Paraboloid, SpaceTimeBox, build_net, cube_halfwidths,
                       cube_probe_points, paraboloid_cap_readings, pdist, rho_plus)
from .solver import Trajectory
from .solver.io import dumps

SHRINK = 1.0 - 1e-9


class ProbeError(RuntimeError):
    pass


# -- sampling of trajectories -----------------------------------------------------------
def _lerp(a, b, w):
    return a + w * (b - a)


class TrajectorySampler:
    """Point values and region extrema of a trajectory."""

    def __init__(self, traj: Trajectory):
        if len(traj) < 2:
            raise ProbeError("probes need at least two snapshots")
        self.traj = traj
        self.grid = traj.grid
        self.N = self.grid.N
        self.times = traj.times
        self.U = traj.stack()
        self.x = self.grid.axes()
        lo = np.array([x[0] for x in self.x])
        hi = np.array([x[-1] for x in self.x])
        self.box = SpaceTimeBox(tuple(lo), tuple(hi), self.times[0], self.times[-1])
        self.sup_abs = float(np.abs(self.U).max())

    def _time_index(self, t: float) -> tuple[int, float]:
        ts = self.times
        if not ts[0] <= t <= ts[-1]:
            raise ProbeError(f"time {t} outside the trajectory span")
        n = int(np.searchsorted(ts, t, side="right")) - 1
        n = min(max(n, 0), len(ts) - 2)
        w = (t - ts[n]) / (ts[n + 1] - ts[n])
        return n, min(max(w, 0.0), 1.0)

    def block_at(self, t: float, sl: tuple[slice, ...]) -> np.ndarray:
        n, w = self._time_index(t)
        a, b = self.U[n][sl], self.U[n + 1][sl]
        if w == 0.0:
            return a.copy()
        if w == 1.0:
            return b.copy()
        return _lerp(a, b, w)

    def _cell(self, x: np.ndarray):
        idx, wts = [], []
        for a in range(self.N):
            xa = self.x[a]
            if not xa[0] <= x[a] <= xa[-1]:
                raise ProbeError(f"point {x} outside the grid")
            k = int(np.searchsorted(xa, x[a], side="right")) - 1
            k = min(max(k, 0), xa.size - 2)
            idx.append(k)
            wts.append(min(max((x[a] - xa[k]) / (xa[k + 1] - xa[k]), 0.0), 1.0))
        return idx, wts

    def value(self, x, t: float) -> float:
        """Multilinear in space, linear in time; written as nested lerps so constants stay exact."""
        x = np.asarray(x, dtype=float)
        idx, wts = self._cell(x)
        block = self.block_at(t, tuple(slice(k, k + 2) for k in idx))
        for a in range(self.N):
            block = _lerp(block[0], block[1], wts[a])
        return float(block)

    def values(self, pts, t: float) -> np.ndarray:
        """Vectorised :meth:`value` for an ``(..., N)`` array of points inside the grid."""
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, self.N)
        n, w = self._time_index(t)
        idx, wts = [], []
        for a in range(self.N):
            xa = self.x[a]
            k = np.clip(np.searchsorted(xa, flat[:, a], side="right") - 1, 0, xa.size - 2)
            idx.append(k)
            wts.append(np.clip((flat[:, a] - xa[k]) / (xa[k + 1] - xa[k]), 0.0, 1.0))

        def corners(U):
            vals = []
            for off in itertools.product((0, 1), repeat=self.N):
                vals.append(U[tuple(k + o for k, o in zip(idx, off))])
            return vals

        out = []
        for U in (self.U[n], self.U[n + 1]):
            vals = corners(U)
            for a in range(self.N):
                half = len(vals) // 2
                vals = [_lerp(vals[i], vals[i + half], wts[a]) for i in range(half)]
            out.append(vals[0])
        res = out[0] if w == 0.0 else out[1] if w == 1.0 else _lerp(out[0], out[1], w)
        return res.reshape(pts.shape[:-1])

    def region_extrema(self, center, halfwidths, t: float) -> tuple[float, float]:
        """(min, max) over nodes strictly inside the cube plus ``3**N`` points just inside its faces."""
        c = np.asarray(center, dtype=float)
        hw = np.asarray(halfwidths, dtype=float)
        sl = []
        for a in range(self.N):
            xa = self.x[a]
            lo = int(np.searchsorted(xa, c[a] - hw[a], side="right"))
            hi = int(np.searchsorted(xa, c[a] + hw[a], side="left"))
            sl.append(slice(lo, max(hi, lo)))
        vals = []
        block = self.block_at(t, tuple(sl))
        if block.size:
            vals += [float(block.min()), float(block.max())]
        for off in itertools.product((-1.0, 0.0, 1.0), repeat=self.N):
            q = np.clip(c + np.asarray(off) * hw * SHRINK, self.box.lo, self.box.hi)
            vals.append(self.value(q, t))
        return min(vals), max(vals)

    def cube_inside(self, center, halfwidths) -> bool:
        c = np.asarray(center)
        hw = np.asarray(halfwidths)
        return bool(np.all(c - hw >= self.box.lo) and np.all(c + hw <= self.box.hi))


# -- sample specification and reports ---------------------------------------------------
@dataclass(frozen=True)
class SampleSpec:
    """What to sample and how.

    ``x_box`` and ``t_range`` restrict the sampled vertices (default: the whole
    trajectory box). ``rho_range`` and ``theta_range`` are sampled
    log-uniformly. ``side_C3`` is the constant used in the admissibility test
    of the intrinsic probes, ``None`` meaning ``C2``.
    """

    n: int = 256
    seed: int = 0
    rho_range: tuple[float, float] = (1e-2, 1e-1)
    theta_range: tuple[float, float] | None = None
    x_box: tuple[Sequence[float], Sequence[float]] | None = None
    t_range: tuple[float, float] | None = None
    side_C3: float | None = None
    positivity_rel: float = 1e-8
    points: tuple | None = None

    def draw(self, sampler: TrajectorySampler, extra_dims: int) -> np.ndarray:
        """Sobol points in the unit cube of dimension ``N + 1 + extra_dims``."""
        d = sampler.N + 1 + extra_dims
        m = max(1, math.ceil(math.log2(max(self.n, 2))))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            eng = qmc.Sobol(d, scramble=True, seed=self.seed)
            return eng.random_base2(m)[: self.n]

    def vertices(self, sampler: TrajectorySampler, u: np.ndarray):
        box = sampler.box
        lo, hi = (np.asarray(box.lo), np.asarray(box.hi)) if self.x_box is None else (
            np.asarray(self.x_box[0], float), np.asarray(self.x_box[1], float))
        t0, t1 = (box.t0, box.t1) if self.t_range is None else self.t_range
        N = sampler.N
        x = lo + u[:, :N] * (hi - lo)
        t = t0 + u[:, N] * (t1 - t0)
        return x, t


    def design(self, sampler: TrajectorySampler, ranges):
        """Vertices plus one log-uniform column per entry of ``ranges``."""
        N = sampler.N
        if self.points is not None:
            rows = np.atleast_2d(np.asarray(self.points, dtype=float))
            if rows.shape[1] != N + 1 + len(ranges):
                raise ValueError(f"explicit points need {N + 1 + len(ranges)} columns")
            return rows[:, :N], rows[:, N], [rows[:, N + 1 + k] for k in range(len(ranges))]
        u01 = self.draw(sampler, len(ranges))
        xs, ts = self.vertices(sampler, u01)
        return xs, ts, [_log_uniform(u01[:, N + 1 + k], r) for k, r in enumerate(ranges)]


def _log_uniform(u, rng):
    lo, hi = rng
    return np.exp(math.log(lo) + u * (math.log(hi) - math.log(lo)))


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def summarize(values: Sequence[float]) -> dict:
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if v.size == 0:
        return {"count": 0}
    fin = v[np.isfinite(v)]
    out = {"count": int(v.size), "finite": int(fin.size), "max": float(v.max()),
           "min": float(v.min())}
    if fin.size:
        out.update({f"p{q}": float(np.percentile(fin, q)) for q in (50, 90, 99)})
    return out


def per_decade(rhos, values, lo: float) -> list[dict]:
    """Aggregate maxima of ``values`` binned by decade of ``rho / lo``."""
    bins: dict[int, list[float]] = {}
    for r, v in zip(rhos, values):
        bins.setdefault(int(math.floor(math.log10(r / lo) + 1e-12)), []).append(v)
    return [{"decade": k, "rho_lo": lo * 10**k, "rho_hi": lo * 10 ** (k + 1),
             "count": len(vs), "max": float(max(vs))} for k, vs in sorted(bins.items())]


@dataclass
class ProbeReport:
    probe: str
    params: dict
    constants: dict
    seed: int | None
    samples: list[dict]
    aggregate: dict
    violations: list[dict] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def admissible(self) -> list[dict]:
        return [s for s in self.samples if s.get("admissible")]

    def to_dict(self) -> dict:
        return _clean({"probe": self.probe, "params": self.params, "constants": self.constants,
                       "seed": self.seed, "samples": self.samples, "aggregate": self.aggregate,
                       "violations": self.violations, "extra": self.extra,
                       "sample_count": len(self.samples)})

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def to_csv(self) -> str:
        rows = [_flatten(s) for s in self.to_dict()["samples"]]
        keys = sorted({k for r in rows for k in r})
        buf = _io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
        return buf.getvalue()


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            for i, item in enumerate(v):
                out[f"{key}_{i + 1}"] = item
        else:
            out[key] = v
    return out


def _no_admissible(name: str, counts: dict) -> ProbeError:
    worst = max(counts, key=counts.get) if counts else "none"
    return ProbeError(f"{name}: no admissible samples; most frequent failure: {worst} ({counts})")


# -- intrinsic Harnack ------------------------------------------------------------------
def harnack_probe(traj: Trajectory, params: AnisotropyParams, C1: float = 1.0,
                  C2: float = 1.0, sample_spec: SampleSpec = SampleSpec()) -> ProbeReport:
    """Smallest ``C3`` with ``sup_back / C3 <= u(x_o, t_o) <= C3 inf_fwd`` per sample.

    ``sup_back`` is taken over ``x_o + K_rho(theta)`` at ``t_o - E`` and
    ``inf_fwd`` over the same cube at ``t_o + E``, where ``theta = u/C1`` and
    ``E = theta**(2-pbar) (C2 rho)**pbar``.
    """
    params.require_range("harnack_probe")
    S = TrajectorySampler(traj)
    pb = params.pbar
    side = C2 if sample_spec.side_C3 is None else sample_spec.side_C3
    xs, ts, (rhos,) = sample_spec.design(S, [sample_spec.rho_range])
    floor = sample_spec.positivity_rel * S.sup_abs
    samples, fails = [], {}
    for x, t, rho in zip(xs, ts, rhos):
        rec = {"point": x.tolist(), "t": float(t), "rho": float(rho)}
        u = S.value(x, t)
        rec["u"] = u
        flags = {"positive": u > floor}
        if flags["positive"]:
            theta = u / C1
            rec["theta"] = theta
            flags["time_room"] = theta ** (2 - pb) * (side * rho) ** pb < float(S.box.time_room(t))
            flags["space_room"] = S.cube_inside(x, cube_halfwidths(theta, side * rho, params))
            E = theta ** (2 - pb) * (C2 * rho) ** pb
            flags["evaluable"] = S.box.t0 <= t - E and t + E <= S.box.t1
        rec["flags"] = flags
        rec["admissible"] = all(flags.values()) and len(flags) == 4
        if rec["admissible"]:
            hw = cube_halfwidths(theta, rho, params)
            _, sup_back = S.region_extrema(x, hw, t - E)
            inf_fwd, _ = S.region_extrema(x, hw, t + E)
            back = sup_back / u
            fwd = u / inf_fwd if inf_fwd > 0 else math.inf
            rec.update(E=E, sup_back=sup_back, inf_fwd=inf_fwd, c3_back=back, c3_fwd=fwd,
                       c3=max(back, fwd))
        else:
            for k, v in flags.items():
                if not v:
                    fails[k] = fails.get(k, 0) + 1
                    break
        samples.append(rec)
    adm = [s for s in samples if s["admissible"]]
    if not adm:
        raise _no_admissible("harnack_probe", fails)
    c3 = [s["c3"] for s in adm]
    decades = per_decade([s["rho"] for s in adm], c3, sample_spec.rho_range[0])
    maxima = [d["max"] for d in decades]
    agg = {"C3": float(max(c3)), "summary": summarize(c3), "decades": decades,
           "decade_ratio": float(max(maxima) / min(maxima)) if min(maxima) > 0 else math.inf,
           "admissible": len(adm), "rejected": fails}
    viol = [{"point": s["point"], "t": s["t"], "rho": s["rho"], "reason": "zero forward infimum"}
            for s in adm if not math.isfinite(s["c3"])]
    return ProbeReport("harnack", params.to_dict(), {"C1": C1, "C2": C2, "side_C3": side},
                       sample_spec.seed, samples, agg, viol)


# -- paraboloids ------------------------------------------------------------------------
def paraboloid_probe(traj: Trajectory, params: AnisotropyParams, C1: float = 1.0,
                     C2: float = 1.0, C3: float = 10.0,
                     sample_spec: SampleSpec = SampleSpec()) -> ProbeReport:
    """Check ``inf_{P+} u >= u/C3`` and ``sup_{P-} u <= C3 u`` on the paraboloids.

    The scanned sets hold the vertex value, cell centres inside the paraboloid
    at recorded snapshot times, and interpolated points just inside the
    spatial reach at those times and at the cap.
    """
    params.require_range("paraboloid_probe")
    S = TrajectorySampler(traj)
    pb = params.pbar
    p = params.p_array
    xs, ts, _ = sample_spec.design(S, [])
    floor = sample_spec.positivity_rel * S.sup_abs
    grid_pts = np.stack(np.meshgrid(*S.x, indexing="ij"), axis=-1)
    samples, fails, skipped, reading_diff = [], {}, 0, 0
    for x, t in zip(xs, ts):
        rec = {"point": x.tolist(), "t": float(t)}
        u = S.value(x, t)
        rec["u"] = u
        if not u > floor:
            rec["admissible"] = False
            fails["positive"] = fails.get("positive", 0) + 1
            samples.append(rec)
            continue
        theta = u / C1
        try:
            vr = rho_plus(u, x, t, S.box, params, C1, C3)
        except GeometryError:
            rec["admissible"] = False
            fails["room"] = fails.get("room", 0) + 1
            samples.append(rec)
            continue
        rec.update(theta=theta, varrho=vr)
        scanned = {}
        for sign in (1, -1):
            P = Paraboloid(tuple(x), float(t), theta, vr, C2, sign, params, S.box)
            vals = [u]
            cap_t = t + sign * P.cap * SHRINK
            times = [(n, tn) for n, tn in enumerate(S.times) if 0 < sign * (tn - t) <= P.cap]
            if S.box.t0 <= cap_t <= S.box.t1:
                times.append((None, cap_t))
            for n, tn in times:
                s = sign * (tn - t)
                reach = (s / (C2**pb * theta ** (2 - p))) ** (1 / p)
                sl = tuple(slice(int(np.searchsorted(S.x[a], x[a] - reach[a], side="left")),
                                 int(np.searchsorted(S.x[a], x[a] + reach[a], side="right")))
                           for a in range(S.N))
                pts = grid_pts[sl]
                if n is not None and pts.size:
                    tt = np.full(pts.shape[:-1], tn)
                    lit, capped = paraboloid_cap_readings(P, pts, tt)
                    reading_diff += int(np.count_nonzero(lit != capped))
                    if lit.any():
                        vals.extend(S.U[n][sl][lit].tolist())
                for q in cube_probe_points(x, reach * SHRINK):
                    if S.box.contains(q, tn):
                        vals.append(S.value(q, tn))
            scanned[sign] = vals
        if len(scanned[1]) == 1 and len(scanned[-1]) == 1:
            rec["admissible"] = False
            skipped += 1
            samples.append(rec)
            continue
        inf_p, sup_m = min(scanned[1]), max(scanned[-1])
        need = max(u / inf_p if inf_p > 0 else math.inf, sup_m / u)
        rec.update(admissible=True, inf_plus=inf_p, sup_minus=sup_m, n_plus=len(scanned[1]),
                   n_minus=len(scanned[-1]), c3_min=need, passes=need <= C3)
        samples.append(rec)
    adm = [s for s in samples if s["admissible"]]
    if not adm:
        raise _no_admissible("paraboloid_probe", {**fails, "empty": skipped})
    need = [s["c3_min"] for s in adm]
    agg = {"C3_min": float(max(need)), "summary": summarize(need),
           "pass_fraction": sum(s["passes"] for s in adm) / len(adm), "admissible": len(adm),
           "empty_skipped": skipped, "rejected": fails, "cap_reading_disagreements": reading_diff}
    viol = [{"point": s["point"], "t": s["t"], "c3_min": s["c3_min"]} for s in adm
            if not s["passes"]]
    return ProbeReport("paraboloid", params.to_dict(), {"C1": C1, "C2": C2, "C3": C3},
                       sample_spec.seed, samples, agg, viol)


# -- time-extrinsic Harnack -------------------------------------------------------------
def _domain_ok(S: TrajectorySampler, x, t_top, u, rho, params, C1, C2, C3) -> bool:
    """Centred cylinder ``(x, t_top) + Q_{C3 rho}(u/C1, C2)`` inside the trajectory box."""
    pb = params.pbar
    theta = u / C1
    hw = cube_halfwidths(theta, C3 * rho, params)
    E = theta ** (2 - pb) * (C2 * C3 * rho) ** pb
    return S.cube_inside(x, hw) and S.box.t0 <= t_top - E and t_top + E <= S.box.t1


def intrinsic_constants(gamma: float, C1: float, eta_tilde: float, pbar: float) -> dict:
    """Constants of the intrinsic form obtained from the time-extrinsic one.

    ``C2_consistent`` makes ``C2~ M**(2-pbar) rho~**pbar`` equal the substituted
    waiting time exactly; ``C2_eta_squared`` is the variant with ``eta**-2``.
    """
    C1t = C1 / eta_tilde
    return {"C1": C1t, "C2_consistent": eta_tilde ** (-pbar) * (2 * gamma / C1t) ** (pbar - 2),
            "C2_eta_squared": eta_tilde ** (-2) * (2 * gamma / C1t) ** (pbar - 2), "C3": 2 * gamma}


def equivalence_check(traj: Trajectory, params: AnisotropyParams, gamma: float,
                      points: Sequence[tuple], C1: float = 1.0, C2: float = 1.0,
                      C3: float = 10.0, eta_tilde: float = 0.5,
                      sampler: TrajectorySampler | None = None) -> dict:
    """Test ``u <= 2 gamma inf_{x_o + K_{rho~}(M)} u(., t_o + C2~ M**(2-pbar) rho~**pbar)``.

    ``points`` are ``(x_o, t_o, rho)`` triples; ``M = eta u / C1`` and
    ``rho~ = eta rho``. Both readings of ``C2~`` are evaluated; points whose
    cube or waiting time leave the trajectory box are reported as not
    evaluable.
    """
    S = sampler or TrajectorySampler(traj)
    pb = params.pbar
    consts = intrinsic_constants(gamma, C1, eta_tilde, pb)
    out = {}
    for reading in ("consistent", "eta_squared"):
        C2t = consts[f"C2_{reading}"]
        ok = bad = skipped = 0
        worst = 0.0
        for x, t, rho in points:
            x = np.asarray(x, dtype=float)
            u = S.value(x, t)
            if not u > 0:
                skipped += 1
                continue
            M = u / consts["C1"]
            rt = eta_tilde * rho
            wait = C2t * M ** (2 - pb) * rt**pb
            hw = cube_halfwidths(M, rt, params)
            theta_t = (2 * gamma) ** (pb - 2) * rho**pb * u ** (2 - pb)
            if (t + wait > S.box.t1 or not S.cube_inside(x, hw)
                    or not _domain_ok(S, x, t + theta_t, u, rho, params, C1, C2, C3)):
                skipped += 1
                continue
            inf_val, _ = S.region_extrema(x, hw, t + wait)
            ratio = u / inf_val if inf_val > 0 else math.inf
            worst = max(worst, ratio / consts["C3"])
            if ratio <= consts["C3"] * (1 + 1e-12):
                ok += 1
            else:
                bad += 1
        n = ok + bad
        out[reading] = {"evaluated": n, "satisfied": ok, "violated": bad, "not_evaluable": skipped,
                        "fraction": ok / n if n else None, "worst_ratio": worst}
    out["constants"] = consts
    return out


def extrinsic_harnack_probe(traj: Trajectory, params: AnisotropyParams, C1: float = 1.0,
                            C3: float = 10.0, eta_tilde: float = 0.5,
                            lam: float | None = None, C2: float = 1.0,
                            sample_spec: SampleSpec = SampleSpec()) -> ProbeReport:
    """Smallest ``gamma`` in the time-extrinsic bound per sample ``(x_o, t_o, rho, theta~)``.

    The bound is ``u <= gamma {(rho**pbar/theta~)**(1/(pbar-2)) +
    (theta~/rho**pbar)**(N/pbar) I**(lam/pbar)}`` with ``I`` the infimum over
    ``x_o + K_{eta rho}(eta u/C1)`` at ``t_o + theta~``. Samples are split by
    the waiting time ``t* = (C1/u)**(pbar-2) (C2 rho)**pbar`` against
    ``theta~/2``.
    """
    params.require_range("extrinsic_harnack_probe")
    S = TrajectorySampler(traj)
    pb, N = params.pbar, params.N
    lam = params.lam if lam is None else lam
    span = S.box.t1 - S.box.t0
    th_range = sample_spec.theta_range or (1e-4 * span, span)
    xs, ts, (rhos, ths) = sample_spec.design(S, [sample_spec.rho_range, th_range])
    floor = sample_spec.positivity_rel * S.sup_abs
    samples, fails = [], {}
    for x, t, rho, tht in zip(xs, ts, rhos, ths):
        rec = {"point": x.tolist(), "t": float(t), "rho": float(rho), "theta_tilde": float(tht)}
        u = S.value(x, t)
        rec["u"] = u
        reason = None
        if not u > floor:
            reason = "positive"
        elif not _domain_ok(S, x, t + tht, u, rho, params, C1, C2, C3):
            reason = "domain"
        else:
            hw = cube_halfwidths(eta_tilde * u / C1, eta_tilde * rho, params)
            if not S.cube_inside(x, hw):
                reason = "domain"
        if reason:
            rec["admissible"] = False
            fails[reason] = fails.get(reason, 0) + 1
            samples.append(rec)
            continue
        inf_val, _ = S.region_extrema(x, hw, t + tht)
        first = (rho**pb / tht) ** (1 / (pb - 2))
        second = (tht / rho**pb) ** (N / pb) * max(inf_val, 0.0) ** (lam / pb)
        tstar = (C1 / u) ** (pb - 2) * (C2 * rho) ** pb
        rec.update(admissible=True, inf=inf_val, first_term=first, second_term=second,
                   gamma=u / (first + second), t_star=tstar,
                   regime="t*<theta/2" if tstar < tht / 2 else "t*>=theta/2")
        samples.append(rec)
    adm = [s for s in samples if s["admissible"]]
    if not adm:
        raise _no_admissible("extrinsic_harnack_probe", fails)
    gam = [s["gamma"] for s in adm]
    gamma = float(max(gam))
    regimes = {}
    for r in ("t*<theta/2", "t*>=theta/2"):
        g = [s["gamma"] for s in adm if s["regime"] == r]
        regimes[r] = summarize(g)
    eq = equivalence_check(traj, params, gamma, [(s["point"], s["t"], s["rho"]) for s in adm],
                           C1, C2, C3, eta_tilde, S)
    agg = {"gamma": gamma, "summary": summarize(gam), "regimes": regimes,
           "admissible": len(adm), "rejected": fails, "equivalence": eq}
    return ProbeReport("extrinsic", params.to_dict(),
                       {"C1": C1, "C2": C2, "C3": C3, "eta_tilde": eta_tilde, "lambda": lam},
                       sample_spec.seed, samples, agg, [], {"theta_range": list(th_range)})


# -- sup bound on non-intrinsic cylinders -----------------------------------------------
def g_func(k, params: AnisotropyParams):
    return float(np.sum(k ** (params.p_array - 2.0)))


def h_func(k, params: AnisotropyParams):
    return float(1.0 / np.sum(k ** (params.p_array - params.pbar2)))


def _invert_increasing(f, y: float, rtol: float = 1e-15) -> float:
    """Solve ``f(k) = y`` for an increasing ``f`` on ``(0, inf)`` by bisection in ``log k``."""
    if not y > 0:
        raise ValueError("target must be positive")
    lo, hi = 0.0, 0.0
    while f(math.exp(lo)) > y:
        lo -= 8.0
        if lo < -700:
            raise ValueError("target below the range of f")
    while f(math.exp(hi)) < y:
        hi += 8.0
        if hi > 700:
            raise ValueError("target above the range of f")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(math.exp(mid)) < y:
            lo = mid
        else:
            hi = mid
        if hi - lo < rtol:
            break
    return math.exp(0.5 * (lo + hi))


def g_inverse(y: float, params: AnisotropyParams) -> float:
    return _invert_increasing(lambda k: g_func(k, params), y)


def h_inverse(y: float, params: AnisotropyParams) -> float:
    return _invert_increasing(lambda k: h_func(k, params), y)


def supbound_gamma(S_val: float, mean_p2: float, M: float, params: AnisotropyParams) -> float:
    """Smallest ``gamma~`` with ``S <= g^-1(1/M) + h^-1(gamma~ (M mean)**(pbar/(N+pbar)))``."""
    base = g_inverse(1.0 / M, params)
    if S_val <= base:
        return 0.0
    scale = (M * mean_p2) ** (params.pbar / (params.N + params.pbar))
    if scale <= 0:
        return math.inf
    return h_func(S_val - base, params) / scale


def _lattice(S: TrajectorySampler, x, half) -> np.ndarray:
    """Midpoint lattice on the box ``x +- half`` at least twice as fine as the grid."""
    axes = []
    for a in range(S.N):
        n = max(4, math.ceil(4 * half[a] / S.grid.spacing[a]))
        axes.append(x[a] - half[a] + (np.arange(n) + 0.5) * (2 * half[a] / n))
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def _time_nodes(S: TrajectorySampler, t_top, depth) -> np.ndarray:
    inner = [t for t in S.times if t_top - depth < t < t_top]
    return np.asarray([t_top - depth] + inner + [t_top])


def supbound_probe(traj: Trajectory, params: AnisotropyParams,
                   lambda_cyl: tuple[float, float] = (1e-3, 1e-2), M: float = 1.0,
                   sample_spec: SampleSpec = SampleSpec()) -> ProbeReport:
    """Smallest ``gamma~`` making the sup estimate hold on sampled cylinders ``Q_{lam,M}``.

    ``Q_{lam,M}`` is ``prod [x_i - lam**(1/p_i), x_i + lam**(1/p_i)] x [t - M lam, t]``;
    the sup is taken over ``Q_{lam/2,M}`` and the mean of ``u_+**pbar2`` over
    ``Q_{lam,M}``. Space is covered by an interpolated midpoint lattice at
    least twice as fine as the grid, time by the recorded snapshots inside the
    cylinder plus its two ends (trapezoid rule for the mean).
    """
    params.require_range("supbound_probe")
    S = TrajectorySampler(traj)
    p = params.p_array
    xs, ts, (lams,) = sample_spec.design(S, [lambda_cyl])
    samples, skipped = [], 0
    for x, t, lam in zip(xs, ts, lams):
        rec = {"point": x.tolist(), "t": float(t), "lambda": float(lam), "M": M}
        half = lam ** (1 / p)
        if not (S.cube_inside(x, half) and t - M * lam >= S.box.t0):
            rec["admissible"] = False
            skipped += 1
            samples.append(rec)
            continue
        tl = _time_nodes(S, t, M * lam)
        pts = _lattice(S, x, half)
        means = [np.mean(np.maximum(S.values(pts, tt), 0.0) ** params.pbar2) for tt in tl]
        mean_p2 = float(trapezoid(means, tl) / (tl[-1] - tl[0]))
        half2 = (lam / 2) ** (1 / p)
        pts2 = _lattice(S, x, half2)
        sup_val = 0.0
        for tt in _time_nodes(S, t, M * lam / 2):
            sup_val = max(sup_val, float(S.values(pts2, tt).max()),
                          S.region_extrema(x, half2 * SHRINK, tt)[1])
        gt = supbound_gamma(sup_val, mean_p2, M, params)
        rec.update(admissible=True, sup=sup_val, mean_p2=mean_p2,
                   g_inv=g_inverse(1.0 / M, params), gamma_tilde=gt)
        samples.append(rec)
    adm = [s for s in samples if s["admissible"]]
    if not adm:
        raise ProbeError("supbound_probe: every cylinder left the trajectory box")
    gts = [s["gamma_tilde"] for s in adm]
    decades = per_decade([s["lambda"] for s in adm], gts, lambda_cyl[0])
    pos = [d["max"] for d in decades if d["max"] > 0]
    agg = {"gamma_tilde": float(max(gts)), "summary": summarize(gts), "decades": decades,
           "decade_ratio": float(max(pos) / min(pos)) if pos else None,
           "admissible": len(adm), "skipped": skipped}
    return ProbeReport("supbound", params.to_dict(), {"M": M, "lambda_range": list(lambda_cyl)},
                       sample_spec.seed, samples, agg)


# -- oscillation decay ------------------------------------------------------------------
def _extrema_backward(S: TrajectorySampler, center, s, hw, E):
    lo_t = max(s - E * SHRINK, S.box.t0)
    times = [lo_t] + [t for t in S.times if lo_t < t < s] + [s]
    mn, mx = math.inf, -math.inf
    for t in times:
        a, b = S.region_extrema(center, hw, t)
        mn, mx = min(mn, a), max(mx, b)
    return mn, mx


def oscillation_decay(traj: Trajectory, center, s: float, R: float, params: AnisotropyParams,
                      omega_o: float | None = None, C1: float = 1.0, C2: float = 1.0,
                      C3: float | None = None, n_max: int = 6) -> ProbeReport:
    """Measured oscillation on the shrinking backward cylinders ``Q_n`` anchored at ``(center, s)``.

    ``omega_o`` defaults to twice the sup of ``|u|`` over ``Q_0``; a value below
    the measured oscillation of ``Q_0`` is rejected. Without ``C3`` the
    empirical constant of :func:`harnack_probe` on the same trajectory is used.
    """
    S = TrajectorySampler(traj)
    if C3 is None:
        C3 = max(C2, harnack_probe(traj, params, C1, C2).aggregate["C3"])
    c = np.asarray(center, dtype=float)
    if omega_o is None:
        # Q_0 depends on omega_o through theta: iterate omega_o = 2 sup_{Q_0} |u|
        omega_o = 2.0 * S.sup_abs
        for _ in range(60):
            q0 = build_net(c, s, R, omega_o, C1, C2, C3, params, 0).level(0)
            hw, E0 = q0.cube.halfwidths, q0.time_extent
            if not (S.cube_inside(c, hw) and s - E0 >= S.box.t0 and s <= S.box.t1):
                raise ProbeError("Q_0 leaves the trajectory box")
            new = 2.0 * max(abs(v) for v in _extrema_backward(S, c, s, hw, E0))
            if new <= 0 or abs(new - omega_o) <= 1e-12 * new:
                break
            omega_o = new
        omega_o = new
    net = build_net(c, s, R, omega_o, C1, C2, C3, params, n_max)
    osc = []
    rows = []
    for n in range(n_max + 1):
        q = net.level(n)
        hw, E = q.cube.halfwidths, q.time_extent
        if not (S.cube_inside(c, hw) and s - E >= S.box.t0 and s <= S.box.t1):
            raise ProbeError(f"net level {n} leaves the trajectory box")
        mn, mx = _extrema_backward(S, c, s, hw, E)
        o = mx - mn
        osc.append(o)
        bound = net.delta**n * omega_o
        rows.append({"n": n, "osc": o, "bound": bound, "ok": o <= bound,
                     "halfwidths": hw.tolist(), "time_extent": E})
    if osc[0] > omega_o:
        raise ProbeError(f"omega_o={omega_o:.6g} is below the oscillation {osc[0]:.6g} on Q_0")
    pos = [(n, o) for n, o in enumerate(osc) if o > 0]
    if len(pos) >= 2:
        nn, oo = np.array(pos).T
        slope = np.polyfit(nn, np.log(oo), 1)[0]
        ratio = float(math.exp(slope))
    else:
        ratio = 0.0
    agg = {"all_levels_ok": all(r["ok"] for r in rows), "delta": net.delta,
           "fitted_ratio": ratio, "omega_o": omega_o, "epsilon": net.epsilon, "A": net.A}
    viol = [r for r in rows if not r["ok"]]
    return ProbeReport("oscillation", params.to_dict(),
                       {"C1": C1, "C2": C2, "C3": C3, "R": R, "n_max": n_max}, None, rows, agg,
                       viol, {"center": c.tolist(), "s": s})


# -- Hölder modulus ---------------------------------------------------------------------
def holder_theory(params: AnisotropyParams, C3: float) -> dict:
    """Exponent ``chi = pbar / (pbar (beta - 1) + p_N)`` with ``delta**beta = delta**((pbar-2)/pbar) / A``."""
    pb = params.pbar
    delta = 4 * C3 / (1 + 4 * C3)
    A = 4.0 ** params.p[-1]
    beta = (pb - 2) / pb + math.log(A) / math.log(1 / delta)
    chi = pb / (pb * (beta - 1) + params.p[-1])
    return {"delta": delta, "A": A, "beta": beta, "chi": chi,
            "beta_check": abs(delta**beta - delta ** ((pb - 2) / pb) / A)}


def holder_modulus(traj: Trajectory, K_box: SpaceTimeBox, params: AnisotropyParams,
                   C1: float = 1.0, n_pairs: int = 2000, C3: float = 10.0,
                   gammas: Sequence[float] = (1.0, 2.0, 4.0), seed: int = 0,
                   pair_radius: float | None = None) -> ProbeReport:
    """Empirical Hölder exponent from random pairs in ``K_box``.

    For each ``gamma`` the report gives the largest ``chi`` such that every
    pair with modulus ``m < 1`` and ``du > 0`` obeys ``du <= gamma omega_o m**chi``.
    ``pair_radius`` (relative to the box size) restricts pairs to nearby
    points to probe small scales.
    """
    S = TrajectorySampler(traj)
    Lam = S.box
    if not K_box.issubset(Lam):
        raise ProbeError("K_box must lie inside the trajectory box")
    omega = 2.0 * S.sup_abs
    pb = params.pbar
    p = params.p_array
    if omega == 0:
        raise ProbeError("zero solution: the modulus is undefined")
    dist = pdist(K_box, Lam, omega, C1, params)
    if dist <= 0:
        raise ProbeError("K_box touches the boundary of the trajectory box")
    rng = np.random.default_rng(seed)
    lo = np.append(K_box.lo, K_box.t0)
    hi = np.append(K_box.hi, K_box.t1)
    a = rng.uniform(lo, hi, size=(n_pairs, S.N + 1))
    if pair_radius is None:
        b = rng.uniform(lo, hi, size=(n_pairs, S.N + 1))
    else:
        b = np.clip(a + rng.uniform(-1, 1, size=a.shape) * pair_radius * (hi - lo), lo, hi)
    ratios = {g: [] for g in gammas}
    skipped = {"m>=1": 0, "du=0": 0}
    pairs = []
    for pa, pb_ in zip(a, b):
        du = abs(S.value(pa[:-1], pa[-1]) - S.value(pb_[:-1], pb_[-1]))
        dx = np.abs(pa[:-1] - pb_[:-1])
        m = (np.sum(dx ** (p / pb) * omega ** ((pb - p) / pb))
             + abs(pa[-1] - pb_[-1]) ** (1 / pb) * omega ** ((pb - 2) / pb)) / dist
        if not m < 1:
            skipped["m>=1"] += 1
            continue
        if not du > 0:
            skipped["du=0"] += 1
            continue
        pairs.append({"m": float(m), "du": float(du)})
        for g in gammas:
            ratios[g].append(math.log(du / (g * omega)) / math.log(m))
    chi_hat = {f"{g:g}": (float(min(r)) if r else None) for g, r in ratios.items()}
    theory = holder_theory(params, C3)
    agg = {"chi_hat": chi_hat, "chi_theory": theory["chi"], "beta": theory["beta"],
           "omega_o": omega, "pdist": dist, "used_pairs": len(pairs), "skipped": skipped}
    return ProbeReport("holder", params.to_dict(), {"C1": C1, "C3": C3, "gammas": list(gammas)},
                       seed, pairs, agg, [], {"K_box": K_box.to_dict(), "theory": theory})
