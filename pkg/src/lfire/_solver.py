"""Numba kernel for the L1-penalized logistic path.

The kernel works in classifier coordinates: labels y in {0,1}, logit
f(x) = intercept + beta'x on a standardized design.  Structure: an outer
loop linearizes the log-loss at the current point (exact gradient), an
inner cyclic coordinate-descent loop with soft-thresholding minimizes a
quadratic model built from a weighted Gram matrix (covariance updates, so
sweeps cost O(p^2) not O(pn)).  Three devices keep the per-lambda cost
down without giving up exactness:

* the Gram matrix is reused across refreshes and lambda steps and rebuilt
  only when the KKT residual stops halving;
* the sequential strong rule screens which coordinates get fresh gradient
  entries during iteration; acceptance of a lambda always requires a
  full-gradient KKT pass, so screening never changes the solution;
* the accepted probabilities/gradient carry over as the first refresh of
  the next lambda (the state is unchanged between path points).
"""

from __future__ import annotations

import numpy as np
from numba import njit

_WEIGHT_FLOOR = 1e-5
_MAX_OUTER = 3000
_GRAM_FACTOR = 0.5
# stale quadratic models are not worth solving exactly; refreshing the
# gradient after a bounded number of sweeps converges faster per flop
_INNER_SWEEP_CAP = 30

STATUS_OK = 0
STATUS_SWEEP_BUDGET = 1
STATUS_NO_KKT = 2


@njit(cache=True)
def _refresh_prob(eta, y, pr):
    """pr = sigmoid(eta); returns mean(pr - y)."""
    n = eta.shape[0]
    acc = 0.0
    for i in range(n):
        e = eta[i]
        if e >= 0.0:
            pe = 1.0 / (1.0 + np.exp(-e))
        else:
            ex = np.exp(e)
            pe = ex / (1.0 + ex)
        pr[i] = pe
        acc += pe - y[i]
    return acc / n


@njit(cache=True)
def _gradient(XT, pr, y, g, screen, full):
    p, n = XT.shape
    inv_n = 1.0 / n
    for j in range(p):
        if full or screen[j]:
            acc = 0.0
            for i in range(n):
                acc += XT[j, i] * (pr[i] - y[i])
            g[j] = acc * inv_n


@njit(cache=True)
def _kkt_residual(g, beta, gint, lam, screen, full):
    kkt = abs(gint)
    for j in range(beta.shape[0]):
        if not (full or screen[j]):
            continue
        if beta[j] == 0.0:
            viol = abs(g[j]) - lam
        elif beta[j] > 0.0:
            viol = abs(g[j] + lam)
        else:
            viol = abs(g[j] - lam)
        if viol > kkt:
            kkt = viol
    return kkt


@njit(cache=True)
def _weighted_gram(XT, pr, G, m):
    """G = (1/n) X'WX, m = (1/n) X'w with floored weights w = p(1-p)."""
    p, n = XT.shape
    w = np.empty(n)
    wbar = 0.0
    for i in range(n):
        wi = pr[i] * (1.0 - pr[i])
        if wi < _WEIGHT_FLOOR:
            wi = _WEIGHT_FLOOR
        w[i] = wi
        wbar += wi
    inv_n = 1.0 / n
    for j in range(p):
        acc = 0.0
        for i in range(n):
            acc += w[i] * XT[j, i]
        m[j] = acc * inv_n
        for k in range(j, p):
            acc = 0.0
            for i in range(n):
                acc += w[i] * XT[j, i] * XT[k, i]
            G[j, k] = acc * inv_n
            G[k, j] = G[j, k]
    return wbar * inv_n


@njit(cache=True)
def _chol_solve(M, rhs):
    """In-place Cholesky solve; returns False on a non-positive pivot."""
    k = M.shape[0]
    for i in range(k):
        for j in range(i):
            s = M[i, j]
            for t in range(j):
                s -= M[i, t] * M[j, t]
            M[i, j] = s / M[j, j]
        s = M[i, i]
        for t in range(i):
            s -= M[i, t] * M[i, t]
        if s <= 1e-300:
            return False
        M[i, i] = np.sqrt(s)
    for i in range(k):
        s = rhs[i]
        for t in range(i):
            s -= M[i, t] * rhs[t]
        rhs[i] = s / M[i, i]
    for i in range(k - 1, -1, -1):
        s = rhs[i]
        for t in range(i + 1, k):
            s -= M[t, i] * rhs[t]
        rhs[i] = s / M[i, i]
    return True


@njit(cache=True)
def _active_newton(G, m, g, beta, v, u_box, dc_box, gint, wbar, lam):
    """Exact minimization of the quadratic model over the current nonzero
    set with signs held fixed (plus the unpenalized intercept).  Collapses
    the coordinate-descent zigzag on strongly correlated active columns.
    Applies nothing if a sign would flip or the system is not PD."""
    p = beta.shape[0]
    a = 0
    for j in range(p):
        if beta[j] != 0.0:
            a += 1
    if a == 0 or a > 400:
        return
    idx = np.empty(a, dtype=np.int64)
    k = 0
    for j in range(p):
        if beta[j] != 0.0:
            idx[k] = j
            k += 1
    M = np.empty((a + 1, a + 1))
    rhs = np.empty(a + 1)
    for ai in range(a):
        ji = idx[ai]
        for aj in range(a):
            M[ai, aj] = G[ji, idx[aj]]
        M[ai, a] = m[ji]
        M[a, ai] = m[ji]
        acc = -g[ji] - v[ji] - (lam if beta[ji] > 0.0 else -lam)
        for aj in range(a):
            acc += G[ji, idx[aj]] * beta[idx[aj]]
        rhs[ai] = acc
    M[a, a] = wbar
    acc = -gint - u_box[0]
    for aj in range(a):
        acc += m[idx[aj]] * beta[idx[aj]]
    rhs[a] = acc
    if not _chol_solve(M, rhs):
        return
    # step toward the solve target, stopping at the first sign flip
    alpha = 1.0
    flip = -1
    for ai in range(a):
        j = idx[ai]
        if rhs[ai] == 0.0 or (rhs[ai] > 0.0) != (beta[j] > 0.0):
            frac = beta[j] / (beta[j] - rhs[ai])
            if frac < alpha:
                alpha = frac
                flip = ai
    if alpha < 1e-3:
        return
    for ai in range(a):
        j = idx[ai]
        target = beta[j] + alpha * (rhs[ai] - beta[j])
        if ai == flip:
            target = 0.0
        d = target - beta[j]
        if d != 0.0:
            for t in range(p):
                v[t] += G[t, j] * d
            u_box[0] += m[j] * d
            beta[j] = target
    dc_new = dc_box[0] + alpha * (rhs[a] - dc_box[0])
    dc_box[0] = dc_new


@njit(cache=True)
def _model_sweep(G, m, g, beta, v, u_box, dc_box, gint, wbar, lam, screen, active_only):
    """One CD sweep on the quadratic model; returns max coefficient change.

    v tracks G @ (beta - beta0); u_box[0] tracks m'(beta - beta0);
    dc_box[0] tracks the intercept offset from the expansion point.
    """
    p = beta.shape[0]
    maxd = 0.0
    for j in range(p):
        if not screen[j]:
            continue
        if active_only and beta[j] == 0.0:
            continue
        num = G[j, j] * beta[j] - (g[j] + v[j] + m[j] * dc_box[0])
        if num > lam:
            bn = (num - lam) / G[j, j]
        elif num < -lam:
            bn = (num + lam) / G[j, j]
        else:
            bn = 0.0
        d = bn - beta[j]
        if d != 0.0:
            for k in range(p):
                v[k] += G[k, j] * d
            u_box[0] += m[j] * d
            beta[j] = bn
            ad = abs(d)
            if ad > maxd:
                maxd = ad
    dc = -(gint + u_box[0] + wbar * dc_box[0]) / wbar
    if dc != 0.0:
        dc_box[0] += dc
        ad = abs(dc)
        if ad > maxd:
            maxd = ad
    return maxd


@njit(cache=True)
def lasso_logit_path(XT, y, lambdas, tol, kkt_tol, max_sweeps):
    """Fit the whole lambda path with warm starts.

    Parameters
    ----------
    XT : (p, n) C-contiguous standardized design, penalized columns only.
    y : (n,) labels in {0., 1.}.
    lambdas : (L,) nonincreasing penalties.
    tol : stall tolerance on coefficient changes within a sweep.
    kkt_tol : exact-gradient optimality tolerance for accepting a point.
    max_sweeps : sweep budget per lambda.

    Returns
    -------
    betas (L, p), intercepts (L,), sweeps (L,), status (L,)
    """
    p, n = XT.shape
    L = lambdas.shape[0]
    betas = np.zeros((L, p))
    intercepts = np.zeros(L)
    sweeps_out = np.zeros(L, dtype=np.int64)
    status = np.zeros(L, dtype=np.int64)

    inv_n = 1.0 / n
    ybar = 0.0
    for i in range(n):
        ybar += y[i]
    ybar *= inv_n

    c = np.log(ybar / (1.0 - ybar))
    beta = np.zeros(p)
    eta = np.full(n, c)

    pr = np.full(n, ybar)
    g = np.zeros(p)
    G = np.empty((p, p))
    m = np.empty(p)
    v = np.empty(p)
    beta0 = np.empty(p)
    u_box = np.empty(1)
    dc_box = np.empty(1)
    screen = np.zeros(p, dtype=np.bool_)
    wbar = _weighted_gram(XT, pr, G, m)

    # probabilities/gradient validity at the current (beta, c):
    state_fresh = False  # pr matches eta
    g_full = False  # g holds the full exact gradient at the current state
    lam_prev = 0.0
    gint = 0.0
    stalled = False  # did the latest sweep stall below tol at the current state

    for li in range(L):
        lam = lambdas[li]
        if g_full:
            # sequential strong rule keyed on the previous solution's gradient
            thr = 2.0 * lam - lam_prev
            for j in range(p):
                screen[j] = beta[j] != 0.0 or abs(g[j]) >= thr
        else:
            for j in range(p):
                screen[j] = True
        total_sweeps = 0
        kkt_prev = np.inf
        accepted = False
        for _outer in range(_MAX_OUTER):
            if not state_fresh:
                gint = _refresh_prob(eta, y, pr)
                state_fresh = True
                g_full = False
                _gradient(XT, pr, y, g, screen, False)
            # control-flow KKT is screen-restricted; screened-out coordinates
            # are verified (or provably clean via the strong rule) on accept;
            # acceptance also requires the last sweep to have stalled at this
            # state (the convergence contract)
            kkt = _kkt_residual(g, beta, gint, lam, screen, False)
            if kkt <= kkt_tol and stalled:
                if not g_full:
                    # verify the screened-out coordinates before accepting
                    _gradient(XT, pr, y, g, screen, True)
                    g_full = True
                    admitted = False
                    for j in range(p):
                        if not screen[j] and abs(g[j]) > lam + kkt_tol:
                            screen[j] = True
                            admitted = True
                    if admitted:
                        kkt_prev = np.inf
                        continue
                accepted = True
                break
            if kkt > _GRAM_FACTOR * kkt_prev:
                wbar = _weighted_gram(XT, pr, G, m)
            kkt_prev = kkt

            for j in range(p):
                v[j] = 0.0
                beta0[j] = beta[j]
            u_box[0] = 0.0
            dc_box[0] = 0.0
            budget_hit = False
            inner_sw = 0
            stalled = False  # reset: sweeps are about to move the state
            while True:
                maxd = _model_sweep(
                    G, m, g, beta, v, u_box, dc_box, gint, wbar, lam, screen, False
                )
                total_sweeps += 1
                inner_sw += 1
                if total_sweeps > max_sweeps:
                    budget_hit = True
                    break
                if maxd < tol:
                    stalled = True
                    break
                if inner_sw >= _INNER_SWEEP_CAP:
                    break
                _active_newton(G, m, g, beta, v, u_box, dc_box, gint, wbar, lam)
                while True:
                    maxd = _model_sweep(
                        G, m, g, beta, v, u_box, dc_box, gint, wbar, lam, screen, True
                    )
                    total_sweeps += 1
                    inner_sw += 1
                    if total_sweeps > max_sweeps:
                        budget_hit = True
                        break
                    if maxd < tol or inner_sw >= _INNER_SWEEP_CAP:
                        break
                if budget_hit or inner_sw >= _INNER_SWEEP_CAP:
                    break
            c += dc_box[0]
            if dc_box[0] != 0.0:
                for i in range(n):
                    eta[i] += dc_box[0]
            for j in range(p):
                d = beta[j] - beta0[j]
                if d != 0.0:
                    for i in range(n):
                        eta[i] += d * XT[j, i]
            state_fresh = False
            if budget_hit:
                status[li] = STATUS_SWEEP_BUDGET
                break
        if status[li] == STATUS_OK and not accepted:
            status[li] = STATUS_NO_KKT
        for j in range(p):
            betas[li, j] = beta[j]
        intercepts[li] = c
        sweeps_out[li] = total_sweeps
        lam_prev = lam
    return betas, intercepts, sweeps_out, status
