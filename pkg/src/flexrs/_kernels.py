"""Hot numeric kernels: surrogate ratios and the interior-point step.

Everything here works on flat float64 arrays in normalized units (powers as
fractions of the budget, noise scaled to one) so the Newton systems stay
well conditioned. The functions are written in loop style compatible with
numba's nopython mode; set FLEXRS_BACKEND=numpy to skip JIT compilation and
run the same source as plain Python (slow, used for debugging and as the
reference path in benchmarks).

Problem layout shared by all kernels:
  * power vector p of length n_pow = 1 + K + M laid out as
    [shared stream, K private streams, M device streams];
  * decision vector x = [p[free_idx], rc, (tau)] where rc holds the
    shared-rate slices of the selected users and tau exists only in the
    feasibility phase;
  * ratio tables a/own/W with one row per linear-fractional term, ordered
    [n_c shared-stream rows, n_k private rows, n_m device rows]:
    the term's value is a[r] * p[own[r]] / (W[r] . p + sigma2).
"""
import math
import os

import numpy as np

LN2 = 0.6931471805599453

_flag = os.environ.get("FLEXRS_BACKEND", "numba").strip().lower()
if _flag not in ("numba", "numpy"):
    raise ValueError(f"FLEXRS_BACKEND must be 'numba' or 'numpy', got {_flag!r}")
BACKEND = _flag


def aux_values(p, a, own, W, sigma2):
    """Closed-form optimal auxiliaries y = sqrt(a p_own) / (W.p + sigma2)."""
    nr = a.shape[0]
    y = np.zeros(nr)
    for r in range(nr):
        den = sigma2
        for c in range(W.shape[1]):
            den += W[r, c] * p[c]
        y[r] = math.sqrt(a[r] * p[own[r]]) / den
    return y


def surrogate_f(p, y, a, own, W, sigma2):
    """Concave surrogate f_r = 2 y sqrt(a p_own) - y^2 (W.p + sigma2)."""
    nr = a.shape[0]
    f = np.zeros(nr)
    for r in range(nr):
        den = sigma2
        for c in range(W.shape[1]):
            den += W[r, c] * p[c]
        f[r] = 2.0 * y[r] * math.sqrt(a[r] * p[own[r]]) - y[r] * y[r] * den
    return f


def sinr_values(p, a, own, W, sigma2):
    """Exact ratios a p_own / (W.p + sigma2)."""
    nr = a.shape[0]
    g = np.zeros(nr)
    for r in range(nr):
        den = sigma2
        for c in range(W.shape[1]):
            den += W[r, c] * p[c]
        g[r] = a[r] * p[own[r]] / den
    return g


def _rebuild_p(x, p_base, free_idx):
    p = p_base.copy()
    for i in range(free_idx.shape[0]):
        p[free_idx[i]] = x[i]
    return p


def _psi_value(x, t, phase1, p_base, free_idx, a, own, W, y,
               n_c, n_k, n_m, s_arr, sel_pos, r_th, p_max, sigma2):
    """Barrier objective value; ok = 0 when x leaves the domain."""
    n_free = free_idx.shape[0]
    n = x.shape[0]
    n_pow = p_base.shape[0]
    p = _rebuild_p(x, p_base, free_idx)
    nr = n_c + n_k + n_m
    tau = x[n - 1] if phase1 == 1 else 0.0
    n_pos = n - 1 if phase1 == 1 else n

    # positivity slacks
    psi = 0.0
    for i in range(n_pos):
        if x[i] <= 0.0:
            return 0, 0.0
        psi -= math.log(x[i])

    # budget slack
    tot = 0.0
    for c in range(n_pow):
        tot += p[c]
    sb = p_max - tot
    if sb <= 0.0:
        return 0, 0.0
    psi -= math.log(sb)

    # ratio rows
    lvals = np.zeros(nr)
    for r in range(nr):
        den = sigma2
        for c in range(n_pow):
            den += W[r, c] * p[c]
        fr = 2.0 * y[r] * math.sqrt(a[r] * p[own[r]]) - y[r] * y[r] * den
        onef = 1.0 + fr
        if onef <= 1e-300:
            return 0, 0.0
        lvals[r] = math.log(onef) / LN2

    # shared-rate slice total
    rc_sum = 0.0
    for j in range(n_c):
        rc_sum += x[n_free + j]

    # rate-floor slacks
    for k in range(n_k):
        sk = s_arr[k]
        rck = x[n_free + sel_pos[k]] if sel_pos[k] >= 0 else 0.0
        slack = sk * rck + lvals[n_c + k] - r_th - tau
        if slack <= 0.0:
            return 0, 0.0
        psi -= math.log(slack)

    # shared-capacity slacks
    for j in range(n_c):
        slack = lvals[j] - rc_sum
        if slack <= 0.0:
            return 0, 0.0
        psi -= math.log(slack)

    # scaled objective
    if phase1 == 1:
        psi -= t * tau
    else:
        for r in range(n_c + n_k, nr):
            psi -= t * lvals[r]
    return 1, psi


def _psi_derivs(x, t, phase1, p_base, free_idx, inv_free, a, own, W, y,
                n_c, n_k, n_m, s_arr, sel_pos, r_th, p_max, sigma2):
    """Value, gradient, and Hessian of the barrier objective at x."""
    n_free = free_idx.shape[0]
    n = x.shape[0]
    n_pow = p_base.shape[0]
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    ok, _ = _psi_value(x, t, phase1, p_base, free_idx, a, own, W, y,
                       n_c, n_k, n_m, s_arr, sel_pos, r_th, p_max, sigma2)
    if ok == 0:
        return 0, 0.0, grad, hess
    p = _rebuild_p(x, p_base, free_idx)
    nr = n_c + n_k + n_m
    tau = x[n - 1] if phase1 == 1 else 0.0
    n_pos = n - 1 if phase1 == 1 else n
    psi = 0.0

    # per-row terms: value, gradient over x, curvature bits
    lvals = np.zeros(nr)
    gl = np.zeros((nr, n))       # gradient of log2(1 + f_r)
    curve = np.zeros(nr)         # -d2f/dpo2 / ((1+f) ln2), at x-coord of own
    ocoef = np.zeros(nr)         # 1 / ((1+f)^2 ln2) outer-product weight
    gfrow = np.zeros((nr, n))    # gradient of f_r itself
    for r in range(nr):
        den = sigma2
        for c in range(n_pow):
            den += W[r, c] * p[c]
        po = p[own[r]]
        sq = math.sqrt(a[r] * po)
        fr = 2.0 * y[r] * sq - y[r] * y[r] * den
        onef = 1.0 + fr
        lvals[r] = math.log(onef) / LN2
        for c in range(n_pow):
            xi = inv_free[c]
            if xi >= 0 and W[r, c] != 0.0:
                gfrow[r, xi] = -y[r] * y[r] * W[r, c]
        oxi = inv_free[own[r]]
        if oxi >= 0 and y[r] > 0.0 and sq > 0.0:
            gfrow[r, oxi] += y[r] * a[r] / sq
            curve[r] = 0.5 * y[r] * a[r] * a[r] / (sq * sq * sq) / (onef * LN2)
        ocoef[r] = 1.0 / (onef * onef * LN2)
        for i in range(n):
            gl[r, i] = gfrow[r, i] / (onef * LN2)

    def_own = np.zeros(nr, dtype=np.int64)
    for r in range(nr):
        def_own[r] = inv_free[own[r]]

    # positivity barriers
    for i in range(n_pos):
        psi -= math.log(x[i])
        grad[i] -= 1.0 / x[i]
        hess[i, i] += 1.0 / (x[i] * x[i])

    # budget barrier (free power coords only enter the gradient)
    tot = 0.0
    for c in range(n_pow):
        tot += p[c]
    sb = p_max - tot
    psi -= math.log(sb)
    for i in range(n_free):
        grad[i] += 1.0 / sb
        for j2 in range(n_free):
            hess[i, j2] += 1.0 / (sb * sb)

    rc_sum = 0.0
    for j in range(n_c):
        rc_sum += x[n_free + j]

    gs = np.zeros(n)
    # rate floors: slack = s rc + L_priv - r_th - tau
    for k in range(n_k):
        r = n_c + k
        sk = s_arr[k]
        rck = x[n_free + sel_pos[k]] if sel_pos[k] >= 0 else 0.0
        slack = sk * rck + lvals[r] - r_th - tau
        psi -= math.log(slack)
        for i in range(n):
            gs[i] = gl[r, i]
        if sel_pos[k] >= 0:
            gs[n_free + sel_pos[k]] += sk
        if phase1 == 1:
            gs[n - 1] -= 1.0
        inv = 1.0 / slack
        for i in range(n):
            gi = gs[i]
            grad[i] -= gi * inv
            if gi != 0.0:
                for j2 in range(n):
                    if gs[j2] != 0.0:
                        hess[i, j2] += gi * gs[j2] * inv * inv
        # minus hess(L)/slack, PSD because L is concave
        co = ocoef[r] * inv
        for i in range(n):
            gfi = gfrow[r, i]
            if gfi != 0.0:
                for j2 in range(n):
                    if gfrow[r, j2] != 0.0:
                        hess[i, j2] += co * gfi * gfrow[r, j2]
        if def_own[r] >= 0:
            hess[def_own[r], def_own[r]] += curve[r] * inv
        for i in range(n):
            gs[i] = 0.0

    # shared-stream capacity: slack = L_com - sum(rc)
    for j in range(n_c):
        r = j
        slack = lvals[r] - rc_sum
        psi -= math.log(slack)
        for i in range(n):
            gs[i] = gl[r, i]
        for q in range(n_c):
            gs[n_free + q] -= 1.0
        inv = 1.0 / slack
        for i in range(n):
            gi = gs[i]
            grad[i] -= gi * inv
            if gi != 0.0:
                for j2 in range(n):
                    if gs[j2] != 0.0:
                        hess[i, j2] += gi * gs[j2] * inv * inv
        co = ocoef[r] * inv
        for i in range(n):
            gfi = gfrow[r, i]
            if gfi != 0.0:
                for j2 in range(n):
                    if gfrow[r, j2] != 0.0:
                        hess[i, j2] += co * gfi * gfrow[r, j2]
        if def_own[r] >= 0:
            hess[def_own[r], def_own[r]] += curve[r] * inv
        for i in range(n):
            gs[i] = 0.0

    # objective
    if phase1 == 1:
        psi -= t * tau
        grad[n - 1] -= t
    else:
        for r in range(n_c + n_k, nr):
            psi -= t * lvals[r]
            for i in range(n):
                grad[i] -= t * gl[r, i]
            co = t * ocoef[r]
            for i in range(n):
                gfi = gfrow[r, i]
                if gfi != 0.0:
                    for j2 in range(n):
                        if gfrow[r, j2] != 0.0:
                            hess[i, j2] += co * gfi * gfrow[r, j2]
            if def_own[r] >= 0:
                hess[def_own[r], def_own[r]] += t * curve[r]
    return 1, psi, grad, hess


def _chol_solve(h, rhs):
    """Solve h d = rhs for symmetric positive definite h, with a diagonal
    ridge escalated on factorization failure. Returns (ok, d)."""
    n = h.shape[0]
    big = 0.0
    for i in range(n):
        if abs(h[i, i]) > big:
            big = abs(h[i, i])
    ridge = 1e-13 * big + 1e-300
    low = np.zeros((n, n))
    d = np.zeros(n)
    for _attempt in range(6):
        ok = True
        for i in range(n):
            for j in range(i + 1):
                acc = h[i, j]
                if i == j:
                    acc += ridge
                for q in range(j):
                    acc -= low[i, q] * low[j, q]
                if i == j:
                    if acc <= 0.0 or not math.isfinite(acc):
                        ok = False
                        break
                    low[i, i] = math.sqrt(acc)
                else:
                    low[i, j] = acc / low[j, j]
            if not ok:
                break
        if ok:
            for i in range(n):
                acc = rhs[i]
                for q in range(i):
                    acc -= low[i, q] * d[q]
                d[i] = acc / low[i, i]
            for i in range(n - 1, -1, -1):
                acc = d[i]
                for q in range(i + 1, n):
                    acc -= low[q, i] * d[q]
                d[i] = acc / low[i, i]
            return 1, d
        ridge = ridge * 1e4 + 1e-290
    return 0, d


def _newton(x, t, phase1, p_base, free_idx, inv_free, a, own, W, y,
            n_c, n_k, n_m, s_arr, sel_pos, r_th, p_max, sigma2,
            tol, max_steps):
    """Damped Newton descent on the barrier objective at fixed t.

    Status: 1 converged or stalled benignly, 0 left the domain (bug guard),
    2 linear algebra failed.
    """
    n = x.shape[0]
    for _step in range(max_steps):
        ok, psi, grad, hess = _psi_derivs(
            x, t, phase1, p_base, free_idx, inv_free, a, own, W, y,
            n_c, n_k, n_m, s_arr, sel_pos, r_th, p_max, sigma2)
        if ok == 0:
            return x, 0
        okc, step = _chol_solve(hess, -grad)
        if okc == 0:
            return x, 2
        lam2 = 0.0
        for i in range(n):
            lam2 -= grad[i] * step[i]
        if not math.isfinite(lam2) or lam2 <= 2.0 * tol:
            return x, 1
        gd = -lam2
        alpha = 1.0
        moved = False
        for _bt in range(70):
            xn = x + alpha * step
            okv, psin = _psi_value(
                xn, t, phase1, p_base, free_idx, a, own, W, y,
                n_c, n_k, n_m, s_arr, sel_pos, r_th, p_max, sigma2)
            if okv == 1 and psin <= psi + 0.25 * alpha * gd:
                x = xn
                moved = True
                break
            alpha *= 0.5
        if not moved:
            return x, 1
    return x, 1


def solve_barrier(x0, phase1, p_base, free_idx, inv_free, a, own, W, y,
                  n_c, n_k, n_m, s_arr, sel_pos, r_th, p_max, sigma2,
                  t0, mu, gap_tol, newton_tol, max_newton):
    """Path-following loop: center at increasing t until the duality gap
    bound (#constraints / t) is below gap_tol. x0 must be strictly feasible."""
    n = x0.shape[0]
    n_pos = n - 1 if phase1 == 1 else n
    n_con = n_pos + 1 + n_k + n_c
    x = x0.copy()
    t = t0
    status = 1
    for _stage in range(80):
        x, status = _newton(
            x, t, phase1, p_base, free_idx, inv_free, a, own, W, y,
            n_c, n_k, n_m, s_arr, sel_pos, r_th, p_max, sigma2,
            newton_tol, max_newton)
        if status == 0:
            return x, 0
        if n_con / t <= gap_tol:
            break
        t *= mu
    return x, status


if BACKEND == "numba":
    from numba import njit

    _jit = njit(cache=True, fastmath=False)
    aux_values = _jit(aux_values)
    surrogate_f = _jit(surrogate_f)
    sinr_values = _jit(sinr_values)
    _rebuild_p = _jit(_rebuild_p)
    _psi_value = _jit(_psi_value)
    _psi_derivs = _jit(_psi_derivs)
    _chol_solve = _jit(_chol_solve)
    _newton = _jit(_newton)
    solve_barrier = _jit(solve_barrier)
