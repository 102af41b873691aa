"""Comparison methods and exact-posterior oracles: synthetic likelihood,
rejection ABC, and closed-form/numerical true posteriors for the Gaussian
and ARCH models.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import solve_triangular
from scipy.special import logsumexp
from scipy.stats import norm

from .engine import (
    GridPosterior,
    Model,
    WeightedSample,
    _grid_axes,
    _run_nodes,
    _simulate_class_summaries,
)
from .errors import ConfigError, EmptyResultError, SimulationDivergedError
from .rng import Rng
from .simulators import GaussianModelSpec, sample_prior, simulate_dataset

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Synthetic likelihood

_JITTER_START = 1e-6
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class SyntheticLikelihoodFit:
    """Gaussian fit to simulated summaries, with the diagonal jitter that
    was needed to make the covariance usable."""

    mean: np.ndarray  # (d,)
    cov: np.ndarray  # (d, d) raw sample covariance
    jitter: float  # magnitude added to the diagonal (0.0 if none)

    @classmethod
    def from_sims(cls, phi_sims: np.ndarray) -> "SyntheticLikelihoodFit":
        phi_sims = np.atleast_2d(np.asarray(phi_sims, dtype=float))
        n, d = phi_sims.shape
        if n < 2:
            raise ConfigError("synthetic likelihood needs at least 2 simulations")
        mean = phi_sims.mean(axis=0)
        centered = phi_sims - mean
        cov = centered.T @ centered / (n - 1)
        # escalate scaled diagonal jitter until the matrix is comfortably
        # positive definite; an all-zero diagonal falls back to unit scale
        diag_scale = float(np.mean(np.diag(cov)))
        if diag_scale <= 0.0:
            diag_scale = 1.0
        jitter = 0.0
        eps = _JITTER_START
        while not _usable(cov + jitter * np.eye(d)):
            jitter = eps * diag_scale
            eps *= 10.0
            if eps > 1e12:
                raise ConfigError("covariance could not be regularized")
        return cls(mean, cov, jitter)

    def loglik(self, phi_obs: np.ndarray) -> float:
        phi_obs = np.asarray(phi_obs, dtype=float)
        d = self.mean.shape[0]
        sigma = self.cov + self.jitter * np.eye(d)
        chol = np.linalg.cholesky(sigma)
        return _mvn_loglik(phi_obs, self.mean, chol, d)


def _usable(sigma: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        return False
    eig = np.linalg.eigvalsh(sigma)
    return eig[0] > 0.0 and eig[-1] / eig[0] <= _COND_LIMIT


def _mvn_loglik(x: np.ndarray, mean: np.ndarray, chol: np.ndarray, d: int) -> float:
    u = solve_triangular(chol, x - mean, lower=True)
    return float(
        -0.5 * u @ u - np.log(np.diag(chol)).sum() - 0.5 * d * np.log(2.0 * np.pi)
    )


def synthetic_loglik(phi_sims: np.ndarray, phi_obs: np.ndarray) -> float:
    """Gaussian log-density of the observed summaries under the sample mean
    and covariance of the simulated ones."""
    return SyntheticLikelihoodFit.from_sims(phi_sims).loglik(phi_obs)


# ---------------------------------------------------------------------------
# Rejection ABC


@dataclass(frozen=True)
class AbcResult:
    """Accepted prior draws with their summary distances."""

    accepted: np.ndarray  # (k, d)
    distances: np.ndarray  # (k,)
    threshold: float
    acceptance_rate: float

    def __post_init__(self):
        if np.any(self.distances > self.threshold * (1 + 1e-12)):
            raise ConfigError("accepted distances must not exceed the threshold")

    def to_weighted_sample(self) -> WeightedSample:
        k = self.accepted.shape[0]
        return WeightedSample.from_log_weights(self.accepted, np.zeros(k))


def rejection_abc(
    model: Model,
    x0,
    n_sims: int,
    rng: Rng,
    *,
    rate: float | None = None,
    threshold: float | None = None,
) -> AbcResult:
    """Accept prior draws whose simulated summaries are close to psi(x0).

    Distances are Euclidean after per-coordinate standardization by the
    standard deviation over all n_sims simulated summaries.  `rate` keeps
    the floor(rate*n_sims) closest draws; `threshold` keeps everything at
    or below a fixed distance.
    """
    if n_sims < 1:
        raise ConfigError("n_sims must be >= 1")
    if (rate is None) == (threshold is None):
        raise ConfigError("give exactly one of rate= or threshold=")
    if rate is not None and not 0.0 < rate <= 1.0:
        raise ConfigError("rate must lie in (0, 1]")
    model = model.bind(x0) if model.summary_spec.needs_observed else model
    smap = model.summary_map()
    d = model.prior_bounds.shape[0]
    thetas = np.empty((n_sims, d))
    datasets = []
    for i in range(n_sims):
        for attempt in range(10):
            sub = rng.substream("abc", i, attempt)
            theta = sample_prior(model.spec, 1, sub.substream("theta"))[0]
            try:
                x = simulate_dataset(model.spec, theta, sub.substream("data"))
            except SimulationDivergedError:
                continue
            thetas[i] = theta
            datasets.append(np.asarray(x))
            break
        else:
            raise SimulationDivergedError(-1, f"ABC draw {i} kept diverging")
    phi = smap.apply_batch(np.stack(datasets), rng.substream("abc-noise"))
    phi0 = smap.apply(x0, rng.substream("abc-obs-noise"))
    scale = phi.std(axis=0)
    scale[scale == 0.0] = 1.0
    dist = np.sqrt((((phi - phi0) / scale) ** 2).sum(axis=1))
    if rate is not None:
        k = int(np.floor(rate * n_sims))
        if k < 1:
            raise EmptyResultError("requested rate accepts zero draws")
        order = np.argsort(dist, kind="stable")[:k]
        chosen = np.sort(order)
        thr = float(dist[order[-1]])
    else:
        chosen = np.nonzero(dist <= threshold)[0]
        if chosen.size == 0:
            raise EmptyResultError("no draw fell inside the ABC threshold")
        thr = float(threshold)
    k = chosen.size
    return AbcResult(thetas[chosen], dist[chosen], thr, k / n_sims)


# ---------------------------------------------------------------------------
# Exact posteriors


@dataclass(frozen=True)
class GaussianPosteriorTruth:
    """Closed-form posterior over the mean, with its coefficient curves
    alpha0(mu), alpha1(mu), alpha2(mu) such that
    log p(mu | x0) = alpha0 + alpha1*x0 + alpha2*x0^2 on the prior support."""

    grid: GridPosterior
    alpha0: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray


def gaussian_true_posterior(
    x0: float, spec: GaussianModelSpec, mu_grid
) -> GaussianPosteriorTruth:
    mu = np.asarray(mu_grid, dtype=float)
    s2 = spec.sigma_o**2
    norm_const = norm.cdf((spec.prior_hi - x0) / spec.sigma_o) - norm.cdf(
        (spec.prior_lo - x0) / spec.sigma_o
    )
    alpha0 = -(mu**2) / (2 * s2) - np.log(np.sqrt(2 * np.pi * s2)) - np.log(norm_const)
    alpha1 = mu / s2
    alpha2 = np.full_like(mu, -1.0 / (2 * s2))
    log_post = alpha0 + alpha1 * x0 + alpha2 * x0**2
    inside = (mu > spec.prior_lo) & (mu < spec.prior_hi)
    log_post = np.where(inside, log_post, -np.inf)
    grid = GridPosterior.from_log_values((mu,), log_post)
    return GaussianPosteriorTruth(grid, alpha0, alpha1, alpha2)


def _initial_innovation_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and log-weights for integrating a function of e(0) against
    N(0,1): composite Gauss-Legendre with `order` nodes per unit-width
    panel over [-12, 12], the standard-normal weight folded in.

    Plain Gauss-Hermite converges too slowly here: the integrand has
    poles at e(0) = +/- i sqrt(0.2/theta2), which approach the real axis
    as theta2 grows; the composite rule is panel-local and unaffected.
    """
    if order < 1:
        raise ConfigError("quadrature order must be >= 1")
    x, w = leggauss(order)
    edges = np.arange(-12.0, 12.0 + 1e-9)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    nodes = (mid[:, None] + half * x[None, :]).ravel()
    weights = np.tile(half * w, mid.size)
    log_w = np.log(weights) + norm.logpdf(nodes)
    return nodes, log_w


def arch_grid_loglik(y, theta1_axis, theta2_axis, quad_order: int = 64) -> np.ndarray:
    """Exact ARCH log-likelihood on a (theta1, theta2) grid.

    Given theta1, the innovations e(t) = y(t) - theta1*y(t-1) are
    determined by the data for t >= 1, so only the initial e(0) ~ N(0,1)
    is latent; it enters the variance of the first observation and is
    integrated out numerically (see `_initial_innovation_rule`).
    """
    y = np.asarray(y, dtype=float)
    t1 = np.asarray(theta1_axis, dtype=float)
    t2 = np.asarray(theta2_axis, dtype=float)
    nodes, log_w = _initial_innovation_rule(quad_order)
    e0_sq = nodes**2
    yprev = np.concatenate([[0.0], y[:-1]])
    out = np.empty((t1.size, t2.size))
    for i, th1 in enumerate(t1):
        e = y - th1 * yprev
        resid_sq = e[1:] ** 2  # observations t = 2..T
        drive = e[:-1] ** 2
        var_body = 0.2 + t2[:, None] * drive[None, :]  # (n2, T-1)
        body = -0.5 * (np.log(2 * np.pi * var_body) + resid_sq[None, :] / var_body).sum(axis=1)
        var_head = 0.2 + t2[:, None] * e0_sq[None, :]  # (n2, nodes)
        head_terms = (
            log_w[None, :]
            - 0.5 * np.log(2 * np.pi * var_head)
            - y[0] ** 2 / (2 * var_head)
        )
        head = logsumexp(head_terms, axis=1)
        out[i] = body + head
    return out


def arch_true_posterior(y, grid_axes, quad_order: int = 64) -> GridPosterior:
    """Numerically exact ARCH posterior on a rectangular grid under the
    uniform prior (which is constant on the grid and drops out)."""
    axes = _grid_axes(grid_axes)
    if len(axes) != 2:
        raise ConfigError("the ARCH posterior lives on a (theta1, theta2) grid")
    loglik = arch_grid_loglik(y, axes[0], axes[1], quad_order)
    return GridPosterior.from_log_values(axes, loglik)


# ---------------------------------------------------------------------------
# Synthetic-likelihood posteriors on the engine's output formats


def _synthlik_evaluator(ctx, idx: int):
    model = ctx["model"]
    theta = ctx["thetas"][idx]
    rng = ctx["rng"].substream(ctx["tag"], idx)
    if not model.in_support(theta):
        return idx, -np.inf
    try:
        phi = _simulate_class_summaries(model, ctx["smap"], theta, ctx["n_theta"], rng)
    except SimulationDivergedError:
        logger.warning("SL node %d at theta=%s diverged persistently; assigning "
                       "posterior 0", idx, np.asarray(theta).tolist())
        return idx, -np.inf
    return idx, synthetic_loglik(phi, ctx["psi0"])


def _synthlik_ctx(model: Model, x0, thetas, n_theta: int, rng: Rng, tag: str) -> dict:
    model = model.bind(x0) if model.summary_spec.needs_observed else model
    smap = model.summary_map()
    psi0 = smap.apply(x0, rng.substream("obs-noise"))
    return {
        "model": model, "thetas": thetas, "smap": smap, "psi0": psi0,
        "n_theta": n_theta, "rng": rng, "tag": tag, "evaluator": _synthlik_evaluator,
    }


def synthetic_posterior_on_grid(
    model: Model,
    x0,
    grid_axes,
    n_theta: int,
    rng: Rng,
    *,
    workers: int = 1,
) -> GridPosterior:
    """Per node: fit a Gaussian to n_theta simulated summary vectors,
    evaluate it at psi(x0), add the log prior, normalize over the grid."""
    axes = _grid_axes(grid_axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    thetas = np.stack([m.ravel() for m in mesh], axis=1)
    ctx = _synthlik_ctx(model, x0, thetas, n_theta, rng, "sl-node")
    results = _run_nodes(ctx, thetas.shape[0], workers)
    log_values = np.empty(thetas.shape[0])
    for idx, ll in results:
        log_values[idx] = ll + ctx["model"].log_prior_density(thetas[idx])
    shape = tuple(len(ax) for ax in axes)
    return GridPosterior.from_log_values(axes, log_values.reshape(shape))


def synthetic_importance_posterior(
    model: Model,
    x0,
    n_particles: int,
    n_theta: int,
    rng: Rng,
    *,
    workers: int = 1,
) -> WeightedSample:
    """Prior particles weighted by the synthetic likelihood at psi(x0)."""
    if n_particles < 1:
        raise ConfigError("n_particles must be >= 1")
    particles = sample_prior(model.spec, n_particles, rng.substream("particles"))
    ctx = _synthlik_ctx(model, x0, particles, n_theta, rng, "sl-particle")
    results = _run_nodes(ctx, n_particles, workers)
    log_w = np.empty(n_particles)
    for idx, ll in results:
        log_w[idx] = ll
    return WeightedSample.from_log_weights(particles, log_w)
