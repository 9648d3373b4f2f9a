# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the smoothed velocity solve.

Same algorithm and constants as ``_kernels_py``; see that module for the
objective definition.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, fmin, fmax

cnp.import_array()

cdef double _ARMIJO = 1e-4
cdef int _MAX_BACKTRACK = 60
cdef double _CURVATURE_FLOOR = 1e-2


cdef inline double _powf(double c, double a, double v) nogil:
    return c * exp(a * log(v))


cdef double _objective(const double[:] v, const double[:] t, double c, double a,
                       double beta) nogil:
    cdef Py_ssize_t k, n = v.shape[0]
    cdef double r, d, s = 0.0, q = 0.0
    for k in range(n):
        r = t[k] - _powf(c, a, v[k])
        s += r * r
    for k in range(n - 1):
        d = v[k + 1] - v[k]
        q += d * d
    return s + beta * q


cdef void _gradient(const double[:] v, const double[:] t, double c, double a,
                    double beta, double[:] g) nogil:
    cdef Py_ssize_t k, n = v.shape[0]
    cdef double f, d
    for k in range(n):
        f = _powf(c, a, v[k])
        g[k] = -2.0 * (t[k] - f) * (a * f / v[k])
    for k in range(n - 1):
        d = v[k + 1] - v[k]
        g[k] -= 2.0 * beta * d
        g[k + 1] += 2.0 * beta * d


def objective(v, t, double c, double a, double beta):
    cdef double[:] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef double[:] tt = np.ascontiguousarray(t, dtype=np.float64)
    return _objective(vv, tt, c, a, beta)


def gradient(v, t, double c, double a, double beta):
    cdef double[:] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef double[:] tt = np.ascontiguousarray(t, dtype=np.float64)
    out = np.empty(vv.shape[0])
    cdef double[:] g = out
    _gradient(vv, tt, c, a, beta, g)
    return out


cdef void _newton_direction(const double[:] v, const double[:] t, double c, double a,
                            double beta, const double[:] g, const unsigned char[:] active,
                            double[:] diag, double[:] cp, double[:] dp,
                            Py_ssize_t[:] free, double[:] p) nogil:
    cdef Py_ssize_t k, i, n = v.shape[0], m = 0
    cdef double f, r, fp, fpp, gn, h, deg, piv
    cdef double prev_c = 0.0, prev_d = 0.0, lo_i, up_i
    for k in range(n):
        f = _powf(c, a, v[k])
        r = t[k] - f
        fp = a * f / v[k]
        fpp = a * (a - 1.0) * f / (v[k] * v[k])
        gn = 2.0 * fp * fp
        h = fmax(gn - 2.0 * r * fpp, _CURVATURE_FLOOR * gn)
        if n == 1:
            deg = 0.0
        elif k == 0 or k == n - 1:
            deg = 1.0
        else:
            deg = 2.0
        diag[k] = h + 2.0 * beta * deg
        if active[k]:
            p[k] = -g[k] / diag[k]
        else:
            free[m] = k
            m += 1
    if m == 0:
        return
    # Thomas algorithm on the free block; coupling only between index-adjacent free variables.
    for i in range(m):
        lo_i = -2.0 * beta if (i > 0 and free[i] == free[i - 1] + 1) else 0.0
        up_i = -2.0 * beta if (i < m - 1 and free[i + 1] == free[i] + 1) else 0.0
        piv = diag[free[i]] - lo_i * prev_c
        prev_c = up_i / piv
        prev_d = (-g[free[i]] - lo_i * prev_d) / piv
        cp[i] = prev_c
        dp[i] = prev_d
    p[free[m - 1]] = dp[m - 1]
    for i in range(m - 2, -1, -1):
        p[free[i]] = dp[i] - cp[i] * p[free[i + 1]]


def solve(t, double c, double a, double beta, double lo, double hi, v0,
          double tol, int max_iter):
    """Projected Newton iteration; returns ``(v, objective, iterations, converged, history)``."""
    cdef double[:] tt = np.ascontiguousarray(t, dtype=np.float64)
    cdef Py_ssize_t k, n = tt.shape[0]
    v_arr = np.clip(np.asarray(v0, dtype=np.float64), lo, hi).copy()
    vn_arr = np.empty(n)
    cdef double[:] v = v_arr
    cdef double[:] vn = vn_arr
    cdef double[:] g = np.empty(n)
    cdef double[:] p = np.empty(n)
    cdef double[:] diag = np.empty(n)
    cdef double[:] cp = np.empty(n)
    cdef double[:] dp = np.empty(n)
    cdef Py_ssize_t[:] free = np.empty(n, dtype=np.intp)
    cdef unsigned char[:] active = np.zeros(n, dtype=np.uint8)
    cdef double F = _objective(v, tt, c, a, beta), F_new = 0.0
    cdef double eps_max = 1e-3 * (hi - lo), eps, pg, pg_norm, step, gd, x
    cdef int it = 0, bt
    cdef bint converged = False, accepted
    history = [F]
    while True:
        _gradient(v, tt, c, a, beta, g)
        pg_norm = 0.0
        for k in range(n):
            pg = v[k] - fmin(fmax(v[k] - g[k], lo), hi)
            pg_norm = fmax(pg_norm, fabs(pg))
        if pg_norm <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        eps = fmin(eps_max, pg_norm)
        for k in range(n):
            active[k] = (v[k] <= lo + eps and g[k] > 0.0) or (v[k] >= hi - eps and g[k] < 0.0)
        _newton_direction(v, tt, c, a, beta, g, active, diag, cp, dp, free, p)

        step = 1.0
        accepted = False
        for bt in range(_MAX_BACKTRACK):
            gd = 0.0
            for k in range(n):
                x = fmin(fmax(v[k] + step * p[k], lo), hi)
                vn[k] = x
                gd += g[k] * (x - v[k])
            F_new = _objective(vn, tt, c, a, beta)
            if F_new <= F + _ARMIJO * gd:
                accepted = True
                break
            step *= 0.5
        if not accepted or F_new > F:
            break
        for k in range(n):
            v[k] = vn[k]
        F = F_new
        history.append(F)
    return v_arr, F, it, bool(converged), history
