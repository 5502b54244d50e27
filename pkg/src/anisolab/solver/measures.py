"""Integral and extent measurements on single fields."""
from __future__ import annotations

import numpy as np

from .grid import Field


def mass(fld: Field) -> float:
    """Midpoint-rule integral of ``u``."""
    return float(fld.values.sum() * fld.grid.cell_volume)


def sup(fld: Field) -> float:
    return float(fld.values.max())


def centroid(fld: Field) -> np.ndarray:
    """Mass centroid of ``u_+``; the grid centre for a field without positive part."""
    u = np.maximum(fld.values, 0.0)
    total = u.sum()
    g = fld.grid
    if total <= 0:
        return 0.5 * (g.lo + g.hi)
    out = np.empty(g.N)
    for a in range(g.N):
        others = tuple(b for b in range(g.N) if b != a)
        out[a] = np.dot(u.sum(axis=others), g.axis(a)) / total
    return out


def _crossing(x: np.ndarray, prof: np.ndarray, level: float, h: float, side: int) -> float:
    """Outermost position where ``prof`` falls to ``level``, interpolated between cells."""
    idx = np.flatnonzero(prof > level)
    k = idx[-1] if side > 0 else idx[0]
    nxt = k + side
    if 0 <= nxt < prof.size:
        a, b = prof[k], prof[nxt]
        frac = (a - level) / (a - b) if a != b else 0.5
        return x[k] + side * frac * h
    return x[k] + side * 0.5 * h


def support_box(fld: Field, eps_rel: float = 1e-3) -> np.ndarray:
    """Per-axis half-widths of ``{u > eps_rel * sup}`` about the mass centroid.

    The set is read off the max-projection of ``u`` onto each axis; the edge
    is located by linear interpolation of that projection across the
    threshold, and the larger of the two one-sided extents is reported.
    """
    if not 0.0 < eps_rel < 1.0:
        raise ValueError("eps_rel must lie in (0, 1)")
    g = fld.grid
    top = sup(fld)
    if top <= 0:
        return np.zeros(g.N)
    level = eps_rel * top
    c = centroid(fld)
    out = np.empty(g.N)
    for a in range(g.N):
        others = tuple(b for b in range(g.N) if b != a)
        prof = fld.values.max(axis=others) if others else fld.values
        x = g.axis(a)
        h = g.spacing[a]
        out[a] = max(c[a] - _crossing(x, prof, level, h, -1),
                     _crossing(x, prof, level, h, +1) - c[a])
    return out


def touches_boundary(fld: Field, eps_rel: float = 1e-3) -> bool:
    """True when the thresholded set reaches the first or last cell of some axis."""
    g = fld.grid
    top = sup(fld)
    if top <= 0:
        return False
    mask = fld.values > eps_rel * top
    for a in range(g.N):
        m = np.moveaxis(mask, a, 0)
        if m[0].any() or m[-1].any():
            return True
    return False
