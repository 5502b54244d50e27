"""Numpy implementation of the kernel interface, used when the extension is absent.

Mirrors the compiled module function for function; arrays are ghost-padded
3-d buffers as described in ``_kernels.h``.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

BC_PERIODIC, BC_FIXED, BC_NOFLUX, BC_WAVE = 0, 1, 3, 4
ST_OK, ST_NONFINITE, ST_MAXSTEPS, ST_UNSTABLE = 0, 1, 2, 3


def _active(w):
    return [w.shape[a] > 1 for a in range(3)]


def _interior(w, skip=None):
    return tuple(
        slice(None) if a == skip or w.shape[a] == 1 else slice(1, -1) for a in range(3)
    )


def fill_ghosts(w, bc):
    if bc not in (BC_PERIODIC, BC_NOFLUX):
        return
    for a, act in enumerate(_active(w)):
        if not act:
            continue
        n = w.shape[a] - 2
        lo, hi = (n, 1) if bc == BC_PERIODIC else (1, n)
        dst = np.moveaxis(w, a, 0)
        dst[0] = dst[lo]
        dst[n + 1] = dst[hi]


def wave_value(prof, x, t):
    """``prof = (amplitude, c, power, x_lo, x_hi)``."""
    s = 1.0 - x + prof[1] * t
    return prof[0] * s ** prof[2] if s > 0.0 else 0.0


def fill_wave(w, prof, t):
    w[0, 0, 0] = wave_value(prof, prof[3], t)
    w[0, 0, -1] = wave_value(prof, prof[4], t)


def _signed_pow(D, p):
    if p == 2.0:
        return D.copy()
    if p == 3.0:
        return np.abs(D) * D
    if p == 4.0:
        return D * D * D
    return np.sign(D) * np.abs(D) ** (p - 1.0)


def fluxes(w, p, h, sgn, F, nthreads=1):
    mx = np.zeros(3)
    ok = True
    for a, act in enumerate(_active(w)):
        if not act:
            continue
        sl = _interior(w, skip=a)
        u = w[sl]
        D = np.diff(u, axis=a) / h[a]
        ad = np.abs(D)
        if not np.isfinite(ad.sum()):
            ok = False
        mx[a] = ad.max() if ad.size else 0.0
        np.multiply(_signed_pow(D, p[a]), sgn, out=F[a])
    return mx, ok


def update(w, F, h, dt, nthreads=1):
    sl = _interior(w)
    for a, act in enumerate(_active(w)):
        if act:
            w[sl] += (dt / h[a]) * np.diff(F[a], axis=a)


def stable_dt(mx, p, h, safety, floor_, active):
    """Largest stable step over the active axes; ``inf`` when all are flat."""
    N = sum(active)
    dt = math.inf
    for a in (a for a in range(3) if active[a]):
        m = max(mx[a], floor_)
        stiff = 2.0 * N * (p[a] - 1.0)
        if p[a] != 2.0:
            if m == 0.0:
                continue
            stiff *= m ** (p[a] - 2.0)
        dt = min(dt, safety * h[a] * h[a] / stiff)
    return dt


def advance(w, p, h, sgn, bc, prof, t, t_end, safety, floor_, dt_min, dt_max, max_steps,
            F, nthreads=1):
    steps = 0
    lo, hi = math.inf, 0.0
    status = ST_OK
    act = _active(w)
    while t < t_end:
        if steps >= max_steps:
            status = ST_MAXSTEPS
            break
        if bc == BC_WAVE:
            fill_wave(w, prof, t)
        else:
            fill_ghosts(w, bc)
        mx, ok = fluxes(w, p, h, sgn, F, nthreads)
        if not ok:
            status = ST_NONFINITE
            break
        dt = min(stable_dt(mx, p, h, safety, floor_, act), dt_max)
        if dt < dt_min:
            if dt_min > stable_dt(mx, p, h, 1.0, floor_, act):
                status = ST_UNSTABLE
                break
            dt = dt_min
        rest = t_end - t
        last = dt >= rest
        if last:
            dt = rest
        update(w, F, h, dt, nthreads)
        t = t_end if last else t + dt
        lo, hi = min(lo, dt), max(hi, dt)
        steps += 1
    return status, t, steps, lo, hi
