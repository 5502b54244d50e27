# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels operating on ghost-padded 3-d arrays."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef extern from "_kernels.h":
    ctypedef struct ak_shape:
        long P[3]
        long n[3]
        int g[3]
    void ak_shape_init(ak_shape *s, const long *P)
    void ak_fill_ghosts(double *w, const ak_shape *s, int bc) nogil
    void ak_fill_wave(double *w, const ak_shape *s, const double *prof, double t) nogil
    int ak_fluxes(const double *w, const ak_shape *s, double *const F[3], const double *p,
                  const double *h, double sgn, double *mx, int nthreads) nogil
    void ak_update(double *w, const ak_shape *s, double *const F[3], const double *h,
                   double dt, int nthreads) nogil
    int ak_advance(double *w, const ak_shape *s, double *const F[3], const double *p,
                   const double *h, double sgn, int bc, const double *prof,
                   double *t, double t_end, double safety, double floor_,
                   double dt_min, double dt_max, long max_steps, double *stats,
                   int nthreads) nogil

BACKEND = "compiled"


cdef void _shape(cnp.ndarray w, ak_shape *s):
    cdef long P[3]
    for a in range(3):
        P[a] = w.shape[a]
    ak_shape_init(s, P)


cdef void _faces(list F, double **out):
    cdef cnp.ndarray arr
    for a in range(3):
        arr = F[a]
        out[a] = <double *> cnp.PyArray_DATA(arr)


def fill_ghosts(cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] w, int bc):
    cdef ak_shape s
    _shape(w, &s)
    ak_fill_ghosts(&w[0, 0, 0], &s, bc)


def fill_wave(cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] w, double[::1] prof, double t):
    cdef ak_shape s
    _shape(w, &s)
    ak_fill_wave(&w[0, 0, 0], &s, &prof[0], t)


def fluxes(cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] w, double[::1] p, double[::1] h,
           double sgn, list F, int nthreads=1):
    """Fill the face arrays in ``F``; return per-axis max |D| and a finiteness flag."""
    cdef ak_shape s
    cdef double *Fp[3]
    cdef double mx[3]
    cdef int ok
    _shape(w, &s)
    _faces(F, Fp)
    with nogil:
        ok = ak_fluxes(&w[0, 0, 0], &s, Fp, &p[0], &h[0], sgn, mx, nthreads)
    return np.array([mx[0], mx[1], mx[2]]), bool(ok)


def update(cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] w, list F, double[::1] h, double dt,
           int nthreads=1):
    cdef ak_shape s
    cdef double *Fp[3]
    _shape(w, &s)
    _faces(F, Fp)
    with nogil:
        ak_update(&w[0, 0, 0], &s, Fp, &h[0], dt, nthreads)


def advance(cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] w, double[::1] p, double[::1] h,
            double sgn, int bc, double[::1] prof, double t, double t_end, double safety,
            double floor_, double dt_min, double dt_max, long max_steps, list F,
            int nthreads=1):
    """Run the adaptive loop to ``t_end``; returns ``(status, t, steps, dt_lo, dt_hi)``."""
    cdef ak_shape s
    cdef double *Fp[3]
    cdef double stats[3]
    cdef int status
    _shape(w, &s)
    _faces(F, Fp)
    with nogil:
        status = ak_advance(&w[0, 0, 0], &s, Fp, &p[0], &h[0], sgn, bc, &prof[0], &t, t_end,
                            safety, floor_, dt_min, dt_max, max_steps, stats, nthreads)
    return status, t, int(stats[0]), stats[1], stats[2]
