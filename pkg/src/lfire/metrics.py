"""Evaluation quantities: symmetrised KL on grids, relative errors and
their paired differences, forecast gain, the Wilcoxon signed-rank test,
and quantile bands.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .engine import GridPosterior
from .errors import ConfigError, DegenerateInputError

# a normalized grid density is never exactly zero after log-sum-exp
# normalization unless the node is excluded; the floor keeps logs finite
_DENSITY_FLOOR = 1e-300


def skl(p: GridPosterior, q: GridPosterior) -> float:
    """Symmetrised Kullback-Leibler divergence between two grid posteriors.

    0.5 * sum p log(p/q) * cell + 0.5 * sum q log(q/p) * cell, with
    densities floored at 1e-300 inside the logs.  Nodes where both
    densities are zero contribute nothing.
    """
    if len(p.axes) != len(q.axes) or any(
        ax_p.shape != ax_q.shape or not np.array_equal(ax_p, ax_q)
        for ax_p, ax_q in zip(p.axes, q.axes)
    ):
        raise ConfigError("sKL needs identical grid axes")
    pv = p.posterior.ravel()
    qv = q.posterior.ravel()
    log_ratio = np.log(np.maximum(pv, _DENSITY_FLOOR)) - np.log(np.maximum(qv, _DENSITY_FLOOR))
    forward = float((pv * log_ratio).sum() * p.cell)
    backward = float(-(qv * log_ratio).sum() * p.cell)
    return 0.5 * forward + 0.5 * backward


def relative_error(est_mean, ref_mean) -> np.ndarray:
    """Element-wise |est - ref| / |ref|."""
    est = np.asarray(est_mean, dtype=float)
    ref = np.asarray(ref_mean, dtype=float)
    if est.shape != ref.shape:
        raise ConfigError("estimate and reference must have equal shapes")
    if np.any(ref == 0.0):
        raise DegenerateInputError("relative error is undefined for a zero reference entry")
    return np.sqrt((est - ref) ** 2 / ref**2)


def delta_rel_error(re_lfire, re_sl) -> np.ndarray:
    """Paired difference of relative errors; negative favours the ratio method."""
    a = np.asarray(re_lfire, dtype=float)
    b = np.asarray(re_sl, dtype=float)
    if a.shape != b.shape:
        raise ConfigError("paired relative errors must have equal shapes")
    return a - b


def forecast_gain(y_true, y_hat, y_hat_sl) -> np.ndarray:
    """Relative decrease in prediction error per horizon step:
    zeta(t) = (||y - y_sl|| - ||y - y_hat||) / ||y - y_sl||, norms over the
    state components at each time."""
    yt = np.atleast_2d(np.asarray(y_true, dtype=float))
    yh = np.atleast_2d(np.asarray(y_hat, dtype=float))
    ys = np.atleast_2d(np.asarray(y_hat_sl, dtype=float))
    if yt.shape != yh.shape or yt.shape != ys.shape:
        raise ConfigError("forecast arrays must share one shape")
    err_hat = np.linalg.norm(yt - yh, axis=1)
    err_sl = np.linalg.norm(yt - ys, axis=1)
    if np.any(err_sl == 0.0):
        raise DegenerateInputError("zero baseline prediction error at some horizon")
    return (err_sl - err_hat) / err_sl


def _signed_ranks(deltas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Midranks of |deltas| and the signs, zeros excluded."""
    d = np.asarray(deltas, dtype=float)
    d = d[d != 0.0]
    if d.size == 0:
        raise DegenerateInputError("signed-rank test is undefined when every delta is zero")
    order = np.argsort(np.abs(d), kind="stable")
    ranks = np.empty(d.size)
    sorted_abs = np.abs(d)[order]
    i = 0
    while i < d.size:
        j = i
        while j + 1 < d.size and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks, np.sign(d)


def wilcoxon_signed_rank(deltas) -> tuple[float, float]:
    """Two-sided signed-rank test: zero differences excluded, midranks for
    ties, exact enumeration below 20 nonzero values, else the normal
    approximation with tie correction and continuity correction.

    Returns (W+, p_value).
    """
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size < 5:
        raise ConfigError("need at least 5 paired differences")
    ranks, signs = _signed_ranks(deltas)
    n = ranks.size
    w_plus = float(ranks[signs > 0].sum())
    if n < 20:
        p = _exact_two_sided(ranks, w_plus)
    else:
        mu = n * (n + 1) / 4.0
        _, counts = np.unique(ranks, return_counts=True)
        tie_term = float((counts**3 - counts).sum()) / 48.0
        sigma = np.sqrt(n * (n + 1) * (2 * n + 1) / 24.0 - tie_term)
        shift = w_plus - mu
        z = (shift - 0.5 * np.sign(shift)) / sigma if shift != 0.0 else 0.0
        p = float(min(1.0, 2.0 * norm.sf(abs(z))))
    return w_plus, p


def _exact_two_sided(ranks: np.ndarray, w_plus: float) -> float:
    """Exact two-sided p over all 2^n sign assignments, by convolution on
    doubled (integer) ranks."""
    doubled = np.round(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:-r] if r > 0 else counts
        counts = counts + shifted
    w2 = int(round(2.0 * w_plus))
    n_assign = 1 << len(doubled)
    p_le = sum(counts[: w2 + 1]) / n_assign
    p_ge = sum(counts[w2:]) / n_assign
    return float(min(1.0, 2.0 * min(p_le, p_ge)))


def quantile_band(values_per_time) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(median, q25, q75) per column, with linear interpolation."""
    arr = np.atleast_2d(np.asarray(values_per_time, dtype=float))
    if arr.shape[0] < 1:
        raise ConfigError("need at least one row")
    median = np.quantile(arr, 0.5, axis=0)
    q25 = np.quantile(arr, 0.25, axis=0)
    q75 = np.quantile(arr, 0.75, axis=0)
    return median, q25, q75


@dataclass(frozen=True)
class PairedComparison:
    """Per-dataset values of a paired comparison statistic."""

    dataset_ids: tuple
    values: np.ndarray
    label: str

    def __post_init__(self):
        if len(self.dataset_ids) != np.asarray(self.values).shape[0]:
            raise ConfigError("ids and values must align")
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("comparison values must be finite")

    @property
    def fraction_negative(self) -> float:
        return float(np.mean(np.asarray(self.values) < 0.0))


def tidy_table_to_csv(rows: list[dict], fieldnames: list[str], path) -> None:
    """One row per dataset x method x metric, plot-ready."""
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames)
        w.writeheader()
        for row in rows:
            w.writerow(
                {k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                 for k, v in row.items()}
            )
