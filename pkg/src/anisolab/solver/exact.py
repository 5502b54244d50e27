"""Closed-form solutions used as oracles.

Each constructor returns a callable ``f(x, t)`` where ``x`` has shape
``(..., N)`` (a plain array is accepted in 1-d).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ..anisotropy import AnisotropyParams


def _coords(x, N):
    x = np.asarray(x, dtype=float)
    if N == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != N:
        raise ValueError(f"points must have trailing dimension {N}")
    return x


@dataclass(frozen=True)
class TravellingWave:
    """``c**(1/(p-2)) ((p-2)/(p-1))**((p-1)/(p-2)) (1 - x + c t)_+**((p-1)/(p-2))``."""

    p: float
    c: float

    def __post_init__(self):
        if not self.p > 2:
            raise ValueError("travelling waves need p > 2")
        if not self.c > 0:
            raise ValueError("wave speed must be positive")

    @property
    def amplitude(self) -> float:
        p = self.p
        return self.c ** (1 / (p - 2)) * ((p - 2) / (p - 1)) ** ((p - 1) / (p - 2))

    @property
    def power(self) -> float:
        return (self.p - 1) / (self.p - 2)

    def front(self, t: float) -> float:
        return 1.0 + self.c * t

    def __call__(self, x, t):
        x = _coords(x, 1)[..., 0]
        s = np.maximum(1.0 - x + self.c * t, 0.0)
        return self.amplitude * s**self.power


def exact_travelling_wave(p: float, c: float) -> TravellingWave:
    return TravellingWave(float(p), float(c))


@dataclass(frozen=True)
class AnisoCone:
    """``(1 + s c t + sum (a_i/p_i') |x_i|**p_i')_+`` with ``s = time_sign``.

    The default form has ``s = -1``; substitution shows the flux divergence is
    ``sum a_i**(p_i-1) > 0`` so only ``s = +1`` together with
    ``c = sum a_i**(p_i-1)`` gives a classical solution. Neither orientation is
    assumed exact; use :func:`cone_residuals`.
    """

    params: AnisotropyParams
    alpha_vec: tuple[float, ...]
    c: float
    time_sign: int = -1

    def __call__(self, x, t):
        x = _coords(x, self.params.N)
        pc = np.asarray(self.params.pconj)
        a = np.asarray(self.alpha_vec)
        s = 1.0 + self.time_sign * self.c * t + np.sum(a / pc * np.abs(x) ** pc, axis=-1)
        return np.maximum(s, 0.0)

    def flux_divergence(self) -> float:
        return float(np.sum(np.asarray(self.alpha_vec) ** (self.params.p_array - 1.0)))


def cone_side_sum(params: AnisotropyParams, alpha_vec) -> float:
    """``sum |a_i|**(p_i-1) a_i``, the side condition fixing the default ``c``."""
    a = np.asarray(alpha_vec, dtype=float)
    return float(np.sum(np.abs(a) ** (params.p_array - 1.0) * a))


def exact_aniso_cone(params: AnisotropyParams, alpha_vec, c: float | None = None,
                     time_sign: int = -1, tol: float = 1e-10) -> AnisoCone:
    """Build the cone; ``c`` defaults to the side-condition value and is checked against it."""
    a = tuple(float(v) for v in alpha_vec)
    if len(a) != params.N or any(v <= 0 for v in a):
        raise ValueError("alpha_vec needs N positive entries")
    side = cone_side_sum(params, a)
    if c is None:
        c = side
    if abs(side - c) > tol * max(1.0, abs(c)):
        raise ValueError(f"side condition violated: sum |a|^(p-1) a = {side} != c = {c}")
    if time_sign not in (1, -1):
        raise ValueError("time_sign must be +1 or -1")
    return AnisoCone(params, a, float(c), time_sign)


@dataclass(frozen=True)
class IsotropicBarenblatt:
    """Source solution of ``u_t = sum_i (|u_i|**(p-2) u_i)_i`` for one common ``p``.

    ``u = t**-k (C - q sum |x_i t**(-k/N)|**(p/(p-1)))_+**((p-1)/(p-2))`` with
    ``k = N/(N(p-2)+p)`` and ``q = ((p-2)/p) (k/N)**(1/(p-1))``; its level sets
    are ``l^{p'}`` balls because the operator acts axis by axis.
    """

    p: float
    N: int
    C: float
    t_shift: float = 0.0

    @property
    def k(self) -> float:
        return self.N / (self.N * (self.p - 2.0) + self.p)

    @property
    def q(self) -> float:
        p = self.p
        return (p - 2.0) / p * (self.k / self.N) ** (1.0 / (p - 1.0))

    @property
    def m(self) -> float:
        return (self.p - 1.0) / (self.p - 2.0)

    @property
    def r(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def sigma(self) -> float:
        return self.C**self.m

    def sup(self, t):
        return self.sigma * (np.asarray(t) + self.t_shift) ** (-self.k)

    def halfwidth(self, t):
        return (self.C / self.q) ** (1.0 / self.r) * (np.asarray(t) + self.t_shift) ** (self.k / self.N)

    def mass(self) -> float:
        return float(np.exp(_log_unit_mass(self.N, self.r, self.m))
                     * (self.C / self.q) ** (self.N / self.r) * self.C**self.m)

    def __call__(self, x, t):
        x = _coords(x, self.N)
        tt = t + self.t_shift
        y = np.abs(x) * tt ** (-self.k / self.N)
        inner = np.maximum(self.C - self.q * np.sum(y**self.r, axis=-1), 0.0)
        return tt ** (-self.k) * inner**self.m


def _log_unit_mass(N, r, m):
    """log of ``int (1 - sum |z_i|**r)_+**m dz`` over R^N."""
    return (N * np.log(2.0) + N * gammaln(1.0 + 1.0 / r) + gammaln(m + 1.0)
            - gammaln(m + 1.0 + N / r))


def exact_isotropic_barenblatt(p: float, N: int, mass_param: float,
                               t_shift: float = 0.0) -> IsotropicBarenblatt:
    """Barenblatt profile whose constant ``C`` equals ``mass_param``."""
    if not p > 2:
        raise ValueError("the degenerate source solution needs p > 2")
    if not mass_param > 0:
        raise ValueError("mass_param must be positive")
    return IsotropicBarenblatt(float(p), int(N), float(mass_param), float(t_shift))


def barenblatt_with_mass(p: float, N: int, mass: float, t_shift: float = 0.0) -> IsotropicBarenblatt:
    """Solve for ``C`` so that the profile carries total ``mass``."""
    b = exact_isotropic_barenblatt(p, N, 1.0, t_shift)
    # mass scales like C**(N/r + m)
    expo = N / b.r + b.m
    return exact_isotropic_barenblatt(p, N, (mass / b.mass()) ** (1.0 / expo), t_shift)
