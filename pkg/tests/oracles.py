"""Brute-force reference implementations used by the acceptance suite.

These deliberately avoid the library's code paths: explicit loops,
explicit cyclic indexing, lstsq-based regressions.
"""

import numpy as np


def wood_statistics_oracle(series, observed):
    """All 13 count-series statistics, straight from their definitions."""
    y = np.asarray(series, dtype=float)
    obs = np.asarray(observed, dtype=float)
    T = y.shape[0]
    out = [y.mean(), float((y == 0).sum())]
    m = y.mean()
    for lag in range(1, 6):
        acc = 0.0
        for t in range(T - lag):
            acc += (y[t] - m) * (y[t + lag] - m)
        out.append(acc / T)
    s = np.sort(np.diff(obs))
    r = np.sort(np.diff(y))
    design = np.column_stack([np.ones_like(s), s, s**2, s**3])
    coef, *_ = np.linalg.lstsq(design, r, rcond=None)
    out.extend(coef.tolist())
    u = y[:-1]
    design2 = np.column_stack([u**0.3, u**0.6])
    coef2, *_ = np.linalg.lstsq(design2, y[1:] ** 0.3, rcond=None)
    out.extend(coef2.tolist())
    return np.array(out)


def hakkarainen_statistics_oracle(traj):
    """All six site-averaged trajectory statistics via double loops."""
    traj = np.asarray(traj, dtype=float)
    K, n_t = traj.shape
    means = traj.mean(axis=1)
    out = np.zeros(6)
    for k in range(K):
        up, down = (k + 1) % K, (k - 1) % K
        out[0] += means[k]
        for t in range(n_t):
            out[1] += (traj[k, t] - means[k]) ** 2 / n_t
            out[3] += (traj[k, t] - means[k]) * (traj[up, t] - means[up]) / n_t
        for t in range(n_t - 1):
            out[2] += (traj[k, t] - means[k]) * (traj[k, t + 1] - means[k]) / n_t
            out[4] += (traj[k, t] - means[k]) * (traj[down, t + 1] - means[down]) / n_t
            out[5] += (traj[k, t] - means[k]) * (traj[up, t + 1] - means[up]) / n_t
    return out / K


def l96_drift_oracle(y, theta1, theta2, F):
    K = y.shape[0]
    out = np.empty(K)
    for k in range(K):
        out[k] = (
            -y[(k - 1) % K] * (y[(k - 2) % K] - y[(k + 1) % K])
            - y[k]
            + F
            - (theta1 + theta2 * y[k])
        )
    return out


def l96_rk4_oracle(y, theta1, theta2, F, dt, n_steps):
    y = np.asarray(y, dtype=float).copy()
    for _ in range(n_steps):
        k1 = l96_drift_oracle(y, theta1, theta2, F)
        k2 = l96_drift_oracle(y + dt / 2 * k1, theta1, theta2, F)
        k3 = l96_drift_oracle(y + dt / 2 * k2, theta1, theta2, F)
        k4 = l96_drift_oracle(y + dt * k3, theta1, theta2, F)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y
