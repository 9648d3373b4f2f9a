"""Pure-Python reference kernels for the smoothed velocity solve.

The objective for one layer is

    F(v) = sum_k (t_k - c v_k^a)^2 + beta * sum_k (v_k - v_{k+1})^2

minimised over the box ``lo <= v <= hi``.  ``_kernels_c.pyx`` mirrors these
functions line for line; keep the two in sync.
"""

import numpy as np

_ARMIJO = 1e-4
_MAX_BACKTRACK = 60
_CURVATURE_FLOOR = 1e-2


def objective(v, t, c, a, beta):
    v = np.asarray(v, dtype=float)
    r = np.asarray(t, dtype=float) - c * v ** a
    dv = np.diff(v)
    return float(r @ r + beta * (dv @ dv))


def gradient(v, t, c, a, beta):
    v = np.asarray(v, dtype=float)
    f = c * v ** a
    r = np.asarray(t, dtype=float) - f
    g = -2.0 * r * (a * f / v)
    if len(v) > 1:
        dv = np.diff(v)
        g[:-1] -= 2.0 * beta * dv
        g[1:] += 2.0 * beta * dv
    return g


def _thomas(lower, diag, upper, rhs):
    """Solve a tridiagonal system; ``lower[0]`` and ``upper[-1]`` are ignored."""
    n = len(diag)
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = upper[0] / diag[0] if n > 1 else 0.0
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / m if i < n - 1 else 0.0
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m
    x = np.empty(n)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def _newton_direction(v, t, c, a, beta, g, active):
    """Reduced Newton step on the free variables, diagonal scaling on the active ones."""
    n = len(v)
    f = c * v ** a
    r = t - f
    fp = a * f / v
    fpp = a * (a - 1.0) * f / (v * v)
    gn = 2.0 * fp * fp
    h = np.maximum(gn - 2.0 * r * fpp, _CURVATURE_FLOOR * gn)
    deg = np.full(n, 2.0)
    if n > 1:
        deg[0] = deg[-1] = 1.0
    else:
        deg[0] = 0.0
    diag = h + 2.0 * beta * deg

    p = np.empty(n)
    p[active] = -g[active] / diag[active]
    free = np.flatnonzero(~active)
    if len(free):
        lower = np.zeros(len(free))
        upper = np.zeros(len(free))
        adjacent = np.diff(free) == 1
        lower[1:][adjacent] = -2.0 * beta
        upper[:-1][adjacent] = -2.0 * beta
        p[free] = _thomas(lower, diag[free], upper, -g[free])
    return p


def solve(t, c, a, beta, lo, hi, v0, tol, max_iter):
    """Projected Newton iteration with an epsilon-active set and Armijo backtracking.

    Returns ``(v, objective, iterations, converged, history)`` where history
    lists the objective at the start and after every accepted step.
    """
    t = np.asarray(t, dtype=float)
    v = np.clip(np.asarray(v0, dtype=float), lo, hi)
    F = objective(v, t, c, a, beta)
    history = [F]
    eps_max = 1e-3 * (hi - lo)
    converged = False
    it = 0
    while True:
        g = gradient(v, t, c, a, beta)
        pg = v - np.clip(v - g, lo, hi)
        pg_norm = float(np.max(np.abs(pg)))
        if pg_norm <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        eps = min(eps_max, pg_norm)
        active = ((v <= lo + eps) & (g > 0.0)) | ((v >= hi - eps) & (g < 0.0))
        p = _newton_direction(v, t, c, a, beta, g, active)

        step = 1.0
        accepted = False
        for _ in range(_MAX_BACKTRACK):
            v_new = np.clip(v + step * p, lo, hi)
            F_new = objective(v_new, t, c, a, beta)
            if F_new <= F + _ARMIJO * float(g @ (v_new - v)):
                accepted = True
                break
            step *= 0.5
        if not accepted or F_new > F:
            break
        v, F = v_new, F_new
        history.append(F)
    return v, F, it, converged, history
