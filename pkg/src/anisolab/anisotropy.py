"""Exponent vector of the anisotropic operator and the scalars derived from it.

Every scaling law used elsewhere in the package (cube half-widths, cylinder
lengths, Barenblatt exponents) is computed from an :class:`AnisotropyParams`
instance, so this module is the single place those formulas live.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ExponentError(ValueError):
    """Raised for an exponent vector that cannot describe the operator."""


def harmonic_mean(p: Sequence[float]) -> float:
    """Return ``N / sum(1/p_i)``."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ExponentError("exponent vector must be a non-empty 1-d sequence")
    if np.any(p <= 0):
        raise ExponentError("harmonic mean needs strictly positive entries")
    return float(p.size / np.sum(1.0 / p))


def check_range(p: Sequence[float]) -> bool:
    """True when ``2 < p_1``, ``p_N < pbar (1 + 1/N)`` and ``pbar < N``."""
    p = np.asarray(p, dtype=float)
    n = p.size
    pbar = harmonic_mean(p)
    return bool(p[0] > 2.0 and p[-1] < pbar * (1.0 + 1.0 / n) and pbar < n)


@dataclass(frozen=True)
class AnisotropyParams:
    """Immutable exponent vector with its derived quantities.

    Construct through :func:`validate_exponents`; the derived fields are
    filled in ``__post_init__`` and never recomputed.
    """

    p: tuple[float, ...]
    N: int = field(init=False)
    pbar: float = field(init=False)
    pbar2: float = field(init=False)
    lam: float = field(init=False)
    alpha: float = field(init=False)
    alpha_i: tuple[float, ...] = field(init=False)
    pconj: tuple[float, ...] = field(init=False)
    in_range: bool = field(init=False)

    def __post_init__(self):
        p = tuple(float(v) for v in self.p)
        n = len(p)
        pbar = harmonic_mean(p)
        lam = n * (pbar - 2.0) + pbar
        alpha = n / lam if lam != 0.0 else math.inf
        alpha_i = tuple((1.0 + 2.0 * alpha) / pi - alpha for pi in p)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "N", n)
        object.__setattr__(self, "pbar", pbar)
        object.__setattr__(self, "pbar2", pbar * (1.0 + 2.0 / n))
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "alpha_i", alpha_i)
        object.__setattr__(self, "pconj", tuple(pi / (pi - 1.0) for pi in p))
        object.__setattr__(self, "in_range", check_range(p))

    @property
    def p_array(self) -> np.ndarray:
        return np.asarray(self.p)

    @property
    def isotropic(self) -> bool:
        return all(pi == self.p[0] for pi in self.p)

    def require_range(self, what: str = "this operation") -> None:
        if not self.in_range:
            raise ExponentError(
                f"{what} needs 2 < p_1, p_N < pbar(1+1/N) and pbar < N; "
                f"got p={self.p}, pbar={self.pbar:.6g}"
            )

    def to_dict(self) -> dict:
        return {
            "exponents": list(self.p),
            "N": self.N,
            "pbar": self.pbar,
            "pbar2": self.pbar2,
            "lambda": self.lam,
            "alpha": self.alpha,
            "alpha_i": list(self.alpha_i),
            "pconj": list(self.pconj),
            "in_range": self.in_range,
        }


def validate_exponents(p: Sequence[float], N: int | None = None) -> AnisotropyParams:
    """Check an exponent vector and build its :class:`AnisotropyParams`.

    Parameters
    ----------
    p : sequence of float
        Exponents ``p_1 <= ... <= p_N``, each larger than 1. Unordered input
        is rejected rather than sorted so axis labels stay meaningful.
    N : int, optional
        Expected dimension; defaults to ``len(p)``.

    Raises
    ------
    ExponentError
        On a length mismatch, non-finite entries, entries ``<= 1`` or a
        descending pair.
    """
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ExponentError("exponents must be a non-empty 1-d sequence")
    if N is None:
        N = arr.size
    if N < 1 or arr.size != N:
        raise ExponentError(f"expected {N} exponents, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ExponentError("exponents must be finite")
    if np.any(arr <= 1.0):
        raise ExponentError("every exponent must exceed 1")
    if np.any(np.diff(arr) < 0):
        raise ExponentError(f"exponents must be ascending, got {tuple(arr)}")
    return AnisotropyParams(tuple(arr.tolist()))


def barenblatt_exponents(params: AnisotropyParams) -> tuple[float, float, tuple[float, ...]]:
    """``(lambda, alpha, alpha_i)`` for the self-similar source solution."""
    return params.lam, params.alpha, params.alpha_i
