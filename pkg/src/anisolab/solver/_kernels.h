/* Flux, update and time-loop kernels on ghost-padded 3-d arrays.
 *
 * Every field is stored as a C-contiguous array of padded shape
 * (P0, P1, P2).  An axis with P > 1 is active and carries one ghost layer
 * on each side; an axis with P == 1 is a dummy used to embed 1-d and 2-d
 * grids.  Face arrays for axis a have the interior shape with n_a + 1
 * entries along a.
 */
#ifndef ANISOLAB_KERNELS_H
#define ANISOLAB_KERNELS_H

#include <math.h>
#include <stddef.h>
#ifdef _OPENMP
#include <omp.h>
#endif

enum { BC_PERIODIC = 0, BC_FIXED = 1, BC_NOFLUX = 3, BC_WAVE = 4 };
enum { ST_OK = 0, ST_NONFINITE = 1, ST_MAXSTEPS = 2, ST_UNSTABLE = 3 };

typedef struct {
    long P[3];     /* padded shape */
    long n[3];     /* interior cells per axis */
    int g[3];      /* ghost width: 1 if active, else 0 */
} ak_shape;

static inline void ak_shape_init(ak_shape *s, const long *P)
{
    for (int a = 0; a < 3; a++) {
        s->P[a] = P[a];
        s->g[a] = P[a] > 1 ? 1 : 0;
        s->n[a] = P[a] - 2 * s->g[a];
    }
}

/* D = (b - a) * invh, F = sgn |D|^(p-2) D; returns max |D| and adds |D| to *acc */
static inline double ak_flux_line(const double *restrict a, const double *restrict b,
                                  double *restrict F, long m, double invh, double p,
                                  double sgn, double *acc)
{
    double mx = 0.0, sum = 0.0;
    if (p == 2.0) {
#pragma omp simd reduction(max:mx) reduction(+:sum)
        for (long k = 0; k < m; k++) {
            double D = (b[k] - a[k]) * invh, ad = fabs(D);
            F[k] = sgn * D;
            mx = ad > mx ? ad : mx;
            sum += ad;
        }
    } else if (p == 3.0) {
#pragma omp simd reduction(max:mx) reduction(+:sum)
        for (long k = 0; k < m; k++) {
            double D = (b[k] - a[k]) * invh, ad = fabs(D);
            F[k] = sgn * ad * D;
            mx = ad > mx ? ad : mx;
            sum += ad;
        }
    } else if (p == 4.0) {
#pragma omp simd reduction(max:mx) reduction(+:sum)
        for (long k = 0; k < m; k++) {
            double D = (b[k] - a[k]) * invh, ad = fabs(D);
            F[k] = sgn * ad * ad * D;
            mx = ad > mx ? ad : mx;
            sum += ad;
        }
    } else {
        double q = p - 1.0;
        for (long k = 0; k < m; k++) {
            double D = (b[k] - a[k]) * invh, ad = fabs(D);
            F[k] = ad > 0.0 ? sgn * copysign(pow(ad, q), D) : 0.0;
            mx = ad > mx ? ad : mx;
            sum += ad;
        }
    }
    *acc += sum;
    return mx;
}

static inline void ak_update_line(double *restrict w, const double *restrict Fl,
                                  const double *restrict Fr, long m, double c)
{
#pragma omp simd
    for (long k = 0; k < m; k++)
        w[k] += c * (Fr[k] - Fl[k]);
}

/* Flux rows for one axis: row r maps to (left pointer, right pointer, face pointer, length). */
static inline double ak_flux_row(const double *w, const ak_shape *s, int axis, double *F,
                                 long r, double p, double invh, double sgn, double *acc)
{
    const long P1 = s->P[1], P2 = s->P[2];
    const long n1 = s->n[1], n2 = s->n[2];
    const int g0 = s->g[0], g1 = s->g[1], g2 = s->g[2];
    if (axis == 2) {
        long i = r / n1 + g0, j = r % n1 + g1;
        const double *row = w + (i * P1 + j) * P2;
        return ak_flux_line(row, row + 1, F + r * (n2 + 1), n2 + 1, invh, p, sgn, acc);
    }
    if (axis == 1) {
        long i = r / (n1 + 1) + g0, f = r % (n1 + 1);
        const double *lo = w + (i * P1 + f) * P2 + g2;
        return ak_flux_line(lo, lo + P2, F + r * n2, n2, invh, p, sgn, acc);
    }
    long f = r / n1, j = r % n1 + g1;
    const double *lo = w + (f * P1 + j) * P2 + g2;
    return ak_flux_line(lo, lo + P1 * P2, F + r * n2, n2, invh, p, sgn, acc);
}

/* Fluxes along one active axis; returns max |D|, *acc collects sum |D|.
 * The parallel region is entered only when it can pay off: opening it costs
 * more than a whole 1-d sweep. */
static double ak_flux_axis(const double *w, const ak_shape *s, int axis, double *F,
                           double p, double h, double sgn, double *acc, int nthreads)
{
    const long n0 = s->n[0], n1 = s->n[1];
    const long rows = axis == 2 ? n0 * n1 : axis == 1 ? n0 * (n1 + 1) : (n0 + 1) * n1;
    const double invh = 1.0 / h;
    double mx = 0.0, sum = 0.0;
    if (nthreads > 1 && rows >= 8) {
#pragma omp parallel for reduction(max:mx) reduction(+:sum) num_threads(nthreads)
        for (long r = 0; r < rows; r++) {
            double part = 0.0;
            double m = ak_flux_row(w, s, axis, F, r, p, invh, sgn, &part);
            mx = m > mx ? m : mx;
            sum += part;
        }
    } else {
        for (long r = 0; r < rows; r++) {
            double m = ak_flux_row(w, s, axis, F, r, p, invh, sgn, &sum);
            mx = m > mx ? m : mx;
        }
    }
    *acc += sum;
    return mx;
}

static inline void ak_update_row(double *w, const ak_shape *s, int axis, const double *F,
                                 long r, double c)
{
    const long P1 = s->P[1], P2 = s->P[2];
    const long n1 = s->n[1], n2 = s->n[2];
    const int g0 = s->g[0], g1 = s->g[1], g2 = s->g[2];
    long i = r / n1, j = r % n1;
    double *row = w + ((i + g0) * P1 + (j + g1)) * P2 + g2;
    if (axis == 2) {
        const double *Fr = F + r * (n2 + 1);
        ak_update_line(row, Fr, Fr + 1, n2, c);
    } else if (axis == 1) {
        const double *Fl = F + (i * (n1 + 1) + j) * n2;
        ak_update_line(row, Fl, Fl + n2, n2, c);
    } else {
        const double *Fl = F + (i * n1 + j) * n2;
        ak_update_line(row, Fl, Fl + n1 * n2, n2, c);
    }
}

static void ak_update_axis(double *w, const ak_shape *s, int axis, const double *F,
                           double c, int nthreads)
{
    const long rows = s->n[0] * s->n[1];
    if (nthreads > 1 && rows >= 8) {
#pragma omp parallel for num_threads(nthreads)
        for (long r = 0; r < rows; r++)
            ak_update_row(w, s, axis, F, r, c);
    } else {
        for (long r = 0; r < rows; r++)
            ak_update_row(w, s, axis, F, r, c);
    }
}

/* Ghost layers for periodic (wrap) and no-flux (mirror copy) closures;
 * fixed ghosts are left untouched. */
static void ak_fill_ghosts(double *w, const ak_shape *s, int bc)
{
    if (bc != BC_PERIODIC && bc != BC_NOFLUX) return;
    const long P0 = s->P[0], P1 = s->P[1], P2 = s->P[2];
    for (int a = 0; a < 3; a++) {
        if (!s->g[a]) continue;
        long n = s->n[a];
        long src_lo = bc == BC_PERIODIC ? n : 1;
        long src_hi = bc == BC_PERIODIC ? 1 : n;
        if (a == 2) {
            for (long r = 0; r < P0 * P1; r++) {
                double *row = w + r * P2;
                row[0] = row[src_lo];
                row[n + 1] = row[src_hi];
            }
        } else if (a == 1) {
            for (long i = 0; i < P0; i++) {
                double *base = w + i * P1 * P2;
                for (long k = 0; k < P2; k++) {
                    base[k] = base[src_lo * P2 + k];
                    base[(n + 1) * P2 + k] = base[src_hi * P2 + k];
                }
            }
        } else {
            long slab = P1 * P2;
            for (long k = 0; k < slab; k++) {
                w[k] = w[src_lo * slab + k];
                w[(n + 1) * slab + k] = w[src_hi * slab + k];
            }
        }
    }
}

/* Travelling-wave ghosts for 1-d runs along the last axis.
 * prof = {amplitude, c, power, x_ghost_lo, x_ghost_hi}. */
static inline double ak_wave(const double *prof, double x, double t)
{
    double s = 1.0 - x + prof[1] * t;
    if (s <= 0.0) return 0.0;
    return prof[0] * (prof[2] == 2.0 ? s * s : pow(s, prof[2]));
}

static void ak_fill_wave(double *w, const ak_shape *s, const double *prof, double t)
{
    long n = s->n[2];
    w[0] = ak_wave(prof, prof[3], t);
    w[n + 1] = ak_wave(prof, prof[4], t);
}

/* Compute all active-axis fluxes; mx[a] receives max |D| per axis.
 * Returns 0 when a non-finite gradient was met. */
static int ak_fluxes(const double *w, const ak_shape *s, double *const F[3], const double *p,
                     const double *h, double sgn, double *mx, int nthreads)
{
    double acc = 0.0;
    for (int a = 0; a < 3; a++) {
        mx[a] = 0.0;
        if (s->g[a])
            mx[a] = ak_flux_axis(w, s, a, F[a], p[a], h[a], sgn, &acc, nthreads);
    }
    return isfinite(acc);
}

static void ak_update(double *w, const ak_shape *s, double *const F[3], const double *h,
                      double dt, int nthreads)
{
    for (int a = 0; a < 3; a++)
        if (s->g[a]) ak_update_axis(w, s, a, F[a], dt / h[a], nthreads);
}

/* Largest stable step with the given safety; INFINITY when every axis is flat. */
static double ak_stable_dt(const ak_shape *s, const double *mx, const double *p,
                           const double *h, double safety, double floor_)
{
    int N = s->g[0] + s->g[1] + s->g[2];
    double dt = INFINITY;
    for (int a = 0; a < 3; a++) {
        if (!s->g[a]) continue;
        double m = mx[a] > floor_ ? mx[a] : floor_;
        double stiff = 2.0 * N * (p[a] - 1.0);
        if (p[a] != 2.0) {
            if (m == 0.0) continue;
            stiff *= pow(m, p[a] - 2.0);
        }
        double cand = safety * h[a] * h[a] / stiff;
        dt = cand < dt ? cand : dt;
    }
    return dt;
}

/* Adaptive forward-Euler loop up to t_end (landing exactly).
 * stats = {steps, dt_min_used, dt_max_used}. */
static int ak_advance(double *w, const ak_shape *s, double *const F[3], const double *p,
                      const double *h, double sgn, int bc, const double *prof,
                      double *t, double t_end, double safety, double floor_,
                      double dt_min, double dt_max, long max_steps, double *stats,
                      int nthreads)
{
    double mx[3];
    long steps = 0;
    double lo = INFINITY, hi = 0.0;
    int status = ST_OK;
    while (*t < t_end) {
        if (steps >= max_steps) { status = ST_MAXSTEPS; break; }
        if (bc == BC_WAVE) ak_fill_wave(w, s, prof, *t);
        else ak_fill_ghosts(w, s, bc);
        if (!ak_fluxes(w, s, F, p, h, sgn, mx, nthreads)) { status = ST_NONFINITE; break; }
        double dt = ak_stable_dt(s, mx, p, h, safety, floor_);
        if (dt > dt_max) dt = dt_max;
        if (dt < dt_min) {
            if (dt_min > ak_stable_dt(s, mx, p, h, 1.0, floor_)) { status = ST_UNSTABLE; break; }
            dt = dt_min;
        }
        double rest = t_end - *t;
        int last = dt >= rest;
        if (last) dt = rest;
        ak_update(w, s, F, h, dt, nthreads);
        *t = last ? t_end : *t + dt;
        lo = dt < lo ? dt : lo;
        hi = dt > hi ? dt : hi;
        steps++;
    }
    stats[0] = (double)steps;
    stats[1] = lo;
    stats[2] = hi;
    return status;
}

#endif
