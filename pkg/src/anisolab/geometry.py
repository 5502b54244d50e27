"""Intrinsic anisotropic regions: cubes, cylinders, paraboloids and nets.

All regions are axis aligned. Membership uses these
closure conventions: cubes are open in space, forward cylinders are ``[t, t+E)``,
backward ones ``(t-E, t]`` and centred ones open on both ends. Every
membership test accepts a stack of points of shape ``(..., N)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .anisotropy import AnisotropyParams

KINDS = ("centered", "forward", "backward")


class GeometryError(ValueError):
    pass


def _positive(**kw):
    for name, v in kw.items():
        if not (np.all(np.isfinite(v)) and np.all(np.asarray(v) > 0)):
            raise GeometryError(f"{name} must be positive and finite, got {v!r}")


def cube_halfwidths(theta: float, rho: float, params: AnisotropyParams) -> np.ndarray:
    """Half-widths ``theta**((p_i-pbar)/p_i) * rho**(pbar/p_i)`` per axis."""
    _positive(theta=theta, rho=rho)
    p = params.p_array
    pbar = params.pbar
    return theta ** ((p - pbar) / p) * rho ** (pbar / p)


def cylinder_time_extent(theta: float, rho: float, C: float, params: AnisotropyParams) -> float:
    """Temporal length ``theta**(2-pbar) * (C rho)**pbar`` of an intrinsic cylinder."""
    _positive(theta=theta, rho=rho, C=C)
    return float(theta ** (2.0 - params.pbar) * (C * rho) ** params.pbar)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    def contains(self, t):
        t = np.asarray(t, dtype=float)
        left = t >= self.lo if self.lo_closed else t > self.lo
        right = t <= self.hi if self.hi_closed else t < self.hi
        return left & right

    def issubset(self, other: "Interval") -> bool:
        lo_ok = other.lo < self.lo or (
            other.lo == self.lo and (other.lo_closed or not self.lo_closed)
        )
        hi_ok = self.hi < other.hi or (
            other.hi == self.hi and (other.hi_closed or not self.hi_closed)
        )
        return bool(lo_ok and hi_ok)


@dataclass(frozen=True)
class SpaceTimeBox:
    """Closed box ``prod [lo_i, hi_i] x [t0, t1]``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    t0: float
    t1: float

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or any(a > b for a, b in zip(lo, hi)) or self.t0 > self.t1:
            raise GeometryError(f"malformed box {lo}..{hi} x [{self.t0}, {self.t1}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "t1", float(self.t1))

    @property
    def N(self) -> int:
        return len(self.lo)

    @property
    def T(self) -> float:
        """Half the time span; the box plays the role of ``Omega x [-T, T]``."""
        return 0.5 * (self.t1 - self.t0)

    @property
    def t_mid(self) -> float:
        return 0.5 * (self.t0 + self.t1)

    def time_room(self, t) -> np.ndarray:
        return self.T - np.abs(np.asarray(t, dtype=float) - self.t_mid)

    def dist_to_boundary(self, x) -> np.ndarray:
        """Sup-norm distance from spatial points to the boundary of the box."""
        x = np.asarray(x, dtype=float)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return np.minimum(x - lo, hi - x).min(axis=-1)

    def contains(self, x, t) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        inside = np.all((x >= np.asarray(self.lo)) & (x <= np.asarray(self.hi)), axis=-1)
        return inside & (t >= self.t0) & (t <= self.t1)

    def issubset(self, other: "SpaceTimeBox") -> bool:
        return (
            all(a >= b for a, b in zip(self.lo, other.lo))
            and all(a <= b for a, b in zip(self.hi, other.hi))
            and self.t0 >= other.t0
            and self.t1 <= other.t1
        )

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi), "t0": self.t0, "t1": self.t1}


@dataclass(frozen=True)
class IntrinsicCube:
    center: tuple[float, ...]
    rho: float
    theta: float
    params: AnisotropyParams

    def __post_init__(self):
        _positive(rho=self.rho, theta=self.theta)
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != self.params.N:
            raise GeometryError("cube centre has the wrong dimension")

    @property
    def halfwidths(self) -> np.ndarray:
        return cube_halfwidths(self.theta, self.rho, self.params)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center)
        hw = self.halfwidths
        return c - hw, c + hw

    def contains(self, x, closed: bool = False) -> np.ndarray:
        d = np.abs(np.asarray(x, dtype=float) - np.asarray(self.center))
        hw = self.halfwidths
        return np.all(d <= hw if closed else d < hw, axis=-1)

    def issubset(self, other: "IntrinsicCube") -> bool:
        lo, hi = self.bounds()
        olo, ohi = other.bounds()
        return bool(np.all(lo >= olo) and np.all(hi <= ohi))

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "rho": self.rho,
            "theta": self.theta,
            "halfwidths": self.halfwidths.tolist(),
        }


@dataclass(frozen=True)
class IntrinsicCylinder:
    cube: IntrinsicCube
    kind: str
    C: float
    t_anchor: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeometryError(f"unknown cylinder kind {self.kind!r}")
        _positive(C=self.C)

    @classmethod
    def make(cls, center, t_anchor, rho, theta, C, kind, params):
        return cls(IntrinsicCube(tuple(center), rho, theta, params), kind, C, float(t_anchor))

    @property
    def time_extent(self) -> float:
        return cylinder_time_extent(self.cube.theta, self.cube.rho, self.C, self.cube.params)

    @property
    def interval(self) -> Interval:
        E, t = self.time_extent, self.t_anchor
        if self.kind == "forward":
            return Interval(t, t + E, True, False)
        if self.kind == "backward":
            return Interval(t - E, t, False, True)
        return Interval(t - E, t + E, False, False)

    def contains(self, x, t, closed: bool = False) -> np.ndarray:
        iv = self.interval
        if closed:
            tin = (np.asarray(t) >= iv.lo) & (np.asarray(t) <= iv.hi)
        else:
            tin = iv.contains(t)
        return self.cube.contains(x, closed=closed) & tin

    def issubset(self, other: "IntrinsicCylinder") -> bool:
        return self.cube.issubset(other.cube) and self.interval.issubset(other.interval)

    def bounding_box(self) -> SpaceTimeBox:
        lo, hi = self.cube.bounds()
        iv = self.interval
        return SpaceTimeBox(tuple(lo), tuple(hi), iv.lo, iv.hi)

    def to_dict(self) -> dict:
        d = self.cube.to_dict()
        iv = self.interval
        d.update(kind=self.kind, C=self.C, t_anchor=self.t_anchor,
                 time_extent=self.time_extent, interval=[iv.lo, iv.hi])
        return d


@dataclass(frozen=True)
class Paraboloid:
    """Forward (``sign=+1``) or backward (``sign=-1``) intrinsic paraboloid.

    ``domain`` optionally restricts membership to a closed space-time box.
    """

    x_o: tuple[float, ...]
    t_o: float
    theta: float
    varrho: float
    C2: float
    sign: int
    params: AnisotropyParams
    domain: SpaceTimeBox | None = None

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise GeometryError("sign must be +1 or -1")
        _positive(theta=self.theta, varrho=self.varrho, C2=self.C2)
        object.__setattr__(self, "x_o", tuple(float(v) for v in self.x_o))

    @property
    def cap(self) -> float:
        """Largest admissible ``|t - t_o|``."""
        pb = self.params.pbar
        return float(self.C2**pb * self.varrho**pb * self.theta ** (2.0 - pb))

    def contains(self, x, t) -> np.ndarray:
        return paraboloid_contains(self, x, t)

    def to_dict(self) -> dict:
        return {
            "vertex": list(self.x_o) + [self.t_o],
            "theta": self.theta,
            "varrho": self.varrho,
            "C2": self.C2,
            "sign": self.sign,
            "cap": self.cap,
        }


def paraboloid_contains(P: Paraboloid, x, t) -> np.ndarray:
    """Evaluate the defining inequalities of ``P`` on every axis."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    p = P.params.p_array
    pb = P.params.pbar
    s = P.sign * (t - P.t_o)
    lower = P.C2**pb * np.abs(x - np.asarray(P.x_o)) ** p * P.theta ** (2.0 - p)
    ok = np.all(lower <= s[..., None], axis=-1) & (s <= P.cap)
    if P.domain is not None:
        ok &= P.domain.contains(x, t)
    return ok


def paraboloid_cap_readings(P: Paraboloid, x, t) -> tuple[np.ndarray, np.ndarray]:
    """Membership under the literal definition and with the cap cube imposed.

    The second reading additionally requires ``x`` to lie in the closed cube
    of radius ``varrho`` and magnitude ``theta``. The two agree whenever the
    spatial bound is implied by the cap, which is what callers check.
    """
    literal = paraboloid_contains(P, x, t)
    cube = IntrinsicCube(P.x_o, P.varrho, P.theta, P.params)
    return literal, literal & cube.contains(x, closed=True)


def rho_plus(u_val: float, x_o, t_o: float, domain: SpaceTimeBox,
             params: AnisotropyParams, C1: float = 1.0, C3: float = 10.0) -> float:
    """Radius bound of the Harnack paraboloids at ``(x_o, t_o)``.

    ``domain`` stands for ``Omega x [-T, T]``; a box with another time range is
    centred so that ``T - |t_o|`` becomes the distance to its nearer time end.
    """
    _positive(u_val=u_val, C1=C1, C3=C3)
    x_o = np.asarray(x_o, dtype=float)
    dist = float(domain.dist_to_boundary(x_o))
    room = float(domain.time_room(t_o))
    if dist <= 0:
        raise GeometryError("x_o is not interior to the spatial domain")
    if room <= 0:
        raise GeometryError("t_o leaves no room inside the time horizon")
    p = params.p_array
    pb = params.pbar
    th = u_val / C1
    spatial = (dist / 2.0) ** p * th ** (2.0 - p)
    inner = min(room, float(spatial.min()))
    return float((C3 ** (-pb) * th ** (pb - 2.0) * inner) ** (1.0 / pb))


def pdist(K: SpaceTimeBox, Lam: SpaceTimeBox, omega_o: float, C1: float,
          params: AnisotropyParams) -> float:
    """Intrinsic distance between a box ``K`` and the boundary of ``Lam``.

    Each axis contributes its own gap: spatial gaps ``g_i`` enter as
    ``g_i**(p_i/pbar) * (omega_o/C1)**((pbar-p_i)/pbar)`` and the temporal gap
    as ``g_t**(1/pbar) * (omega_o/C1)**((pbar-2)/pbar)``.
    """
    if not K.issubset(Lam):
        raise GeometryError("K must be contained in Lambda")
    _positive(omega_o=omega_o, C1=C1)
    p = params.p_array
    pb = params.pbar
    m = omega_o / C1
    gaps = np.minimum(np.subtract(K.lo, Lam.lo), np.subtract(Lam.hi, K.hi))
    px = np.min(gaps ** (p / pb) * m ** ((pb - p) / pb))
    gt = min(K.t0 - Lam.t0, Lam.t1 - K.t1)
    pt = gt ** (1.0 / pb) * m ** ((pb - 2.0) / pb)
    return float(min(px, pt))


@dataclass(frozen=True)
class CylinderNet:
    """Backward cylinders ``Q_n`` shrinking to ``(center, s)``."""

    center: tuple[float, ...]
    s: float
    R: float
    omega_o: float
    C1: float
    C2: float
    C3: float
    params: AnisotropyParams
    n_max: int
    delta: float = field(init=False)
    A: float = field(init=False)
    epsilon: float = field(init=False)

    def __post_init__(self):
        pb = self.params.pbar
        delta = 4.0 * self.C3 / (1.0 + 4.0 * self.C3)
        A = 4.0 ** self.params.p[-1]
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "epsilon", delta ** ((pb - 2.0) / pb) / A)

    def omega(self, n: int) -> float:
        return self.delta**n * self.omega_o

    def theta(self, n: int) -> float:
        return self.omega(n) / self.C1

    def rho(self, n: int) -> float:
        return self.epsilon**n * self.R

    def level(self, n: int) -> IntrinsicCylinder:
        return IntrinsicCylinder.make(self.center, self.s, self.rho(n), self.theta(n),
                                      self.C2, "backward", self.params)

    def levels(self) -> list[IntrinsicCylinder]:
        return [self.level(n) for n in range(self.n_max + 1)]

    def ratios(self, n: int) -> tuple[np.ndarray, float]:
        """Half-width ratios and time-extent ratio of ``Q_{n+1}`` over ``Q_n``."""
        a, b = self.level(n), self.level(n + 1)
        return b.cube.halfwidths / a.cube.halfwidths, b.time_extent / a.time_extent

    def table(self) -> list[dict]:
        rows = []
        for n in range(self.n_max + 1):
            q = self.level(n)
            row = {"n": n, "omega": self.omega(n), "theta": self.theta(n), "rho": self.rho(n),
                   "halfwidths": q.cube.halfwidths.tolist(), "time_extent": q.time_extent}
            if n < self.n_max:
                hw_ratio, t_ratio = self.ratios(n)
                row.update(hw_ratio=hw_ratio.tolist(), time_ratio=t_ratio,
                           nested=bool(self.level(n + 1).issubset(q)))
            rows.append(row)
        return rows

    def to_dict(self) -> dict:
        return {
            "center": list(self.center), "s": self.s, "R": self.R, "omega_o": self.omega_o,
            "constants": {"C1": self.C1, "C2": self.C2, "C3": self.C3},
            "delta": self.delta, "A": self.A, "epsilon": self.epsilon,
            "levels": self.table(),
        }


def build_net(center, s: float, R: float, omega_o: float, C1: float, C2: float, C3: float,
              params: AnisotropyParams, n_max: int) -> CylinderNet:
    """Construct the shrinking net and verify ``Q_{n+1} subset Q_n`` for ``n < n_max``."""
    params.require_range("build_net")
    if not (C3 >= C2 >= 1.0):
        raise GeometryError(f"constants must satisfy C3 >= C2 >= 1, got C2={C2}, C3={C3}")
    _positive(R=R, omega_o=omega_o, C1=C1)
    net = CylinderNet(tuple(float(c) for c in center), float(s), float(R), float(omega_o),
                      float(C1), float(C2), float(C3), params, int(n_max))
    for n in range(n_max):
        if not net.level(n + 1).issubset(net.level(n)):
            raise GeometryError(f"net level {n + 1} escapes level {n}")
    return net


@dataclass
class ChainReport:
    radii: list[float]
    cylinders: list[IntrinsicCylinder]
    steps: list[dict]
    points_enclosed: bool

    @property
    def all_hold(self) -> bool:
        return self.points_enclosed and all(s["ok"] for s in self.steps)

    def to_dict(self) -> dict:
        return {
            "radii": self.radii,
            "points_enclosed": self.points_enclosed,
            "steps": self.steps,
            "all_inclusions_hold": self.all_hold,
        }


def liouville_chain(A_pt: Sequence[float], B_pt: Sequence[float], params: AnisotropyParams,
                    c1: float, c2: float, c4: float, delta: float, n_max: int,
                    omega_o: float = 1.0, slack: float = 1.01, rtol: float = 1e-12) -> ChainReport:
    """Growing chain of backward cylinders anchored at the space-time origin.

    Points are ``(x_1, ..., x_N, t)`` with ``t <= 0``. The first radius is the
    smallest one enclosing both points, inflated by ``slack``; each further
    radius is ``c4 * delta**((2-p_N)/pbar)`` times the previous one. For every
    step the report records whether ``Q~_n`` sits in ``Q_1(R)`` and ``Q_1(R)``
    in ``Q_0(R) = Q~_{n+1}``. Along the ``p_N`` axis the first inclusion is an
    exact equality, so extents are compared with relative tolerance ``rtol``.
    """
    if not 0.0 < delta < 1.0:
        raise GeometryError("delta must lie in (0, 1)")
    if min(c1, c2, c4) <= 1.0:
        raise GeometryError("c1, c2, c4 must exceed 1")
    A_pt = np.asarray(A_pt, dtype=float)
    B_pt = np.asarray(B_pt, dtype=float)
    N = params.N
    if A_pt.shape != (N + 1,) or B_pt.shape != (N + 1,):
        raise GeometryError("points must be (x_1..x_N, t)")
    if A_pt[-1] > 0 or B_pt[-1] > 0:
        raise GeometryError("points must not lie after the anchor time 0")
    p = params.p_array
    pb = params.pbar
    eps = delta ** ((pb - 2.0) / pb) / c4
    theta0 = omega_o / c1
    origin = np.zeros(N)

    def q(R: float, n: int) -> IntrinsicCylinder:
        return IntrinsicCylinder.make(origin, 0.0, eps**n * R, delta**n * theta0, c2,
                                      "backward", params)

    d = max(float(np.linalg.norm(A_pt)), float(np.linalg.norm(B_pt)))
    if d == 0.0:
        R = 1.0
    else:
        r_space = np.max((d**p * theta0 ** (pb - p)) ** (1.0 / pb))
        r_time = (d * theta0 ** (pb - 2.0)) ** (1.0 / pb) / c2
        R = slack * max(float(r_space), float(r_time))
    grow = c4 * delta ** ((2.0 - p[-1]) / pb)

    radii = [R]
    cyls = [q(R, 0)]
    enclosed = bool(cyls[0].contains(A_pt[:N], A_pt[N]) and cyls[0].contains(B_pt[:N], B_pt[N]))
    steps = []
    for n in range(n_max):
        R_next = radii[-1] * grow
        q1 = q(R_next, 1)
        q0 = q(R_next, 0)
        a = _nested(cyls[-1], q1, rtol)
        b = _nested(q1, q0, rtol)
        steps.append({"n": n, "R": R_next, "inner_in_Q1": bool(a), "Q1_in_Q0": bool(b),
                      "ok": bool(a and b)})
        radii.append(R_next)
        cyls.append(q0)
    return ChainReport(radii, cyls, steps, enclosed)


def _nested(inner: IntrinsicCylinder, outer: IntrinsicCylinder, rtol: float) -> bool:
    hw_in, hw_out = inner.cube.halfwidths, outer.cube.halfwidths
    shift = np.abs(np.subtract(inner.cube.center, outer.cube.center))
    space = np.all(shift + hw_in <= hw_out * (1.0 + rtol))
    a, b = inner.interval, outer.interval
    tol = rtol * max(abs(b.lo), abs(b.hi), b.hi - b.lo)
    return bool(space and a.lo >= b.lo - tol and a.hi <= b.hi + tol)


def cube_probe_points(center, halfwidths, shrink: float = 1.0 - 1e-9) -> np.ndarray:
    """The ``3**N`` points ``center + s * halfwidths``, ``s`` in ``{-1, 0, 1}**N``.

    Used as interpolated boundary samples when scanning a region on a grid.
    """
    center = np.asarray(center, dtype=float)
    hw = np.asarray(halfwidths, dtype=float) * shrink
    offs = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=center.size)))
    return center + offs * hw

