"""The inference pipeline: marginal sampling, per-theta ratio fits,
posterior evaluation on grids, and importance-sampled posteriors.

The marginal bank is built once and shared read-only across all theta
evaluations.  Every node/particle owns a derived rng stream keyed by its
index, so results are reproducible for any worker count and schedule.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, DegeneratePosteriorError, SimulationDivergedError
from .penlogit import Design, RatioFit, fit_ratio
from .rng import Rng
from .simulators import ModelSpec, sample_prior, simulate_batch, simulate_dataset
from .summaries import SummaryMap, SummaryMapSpec, make_summary_map

logger = logging.getLogger(__name__)

_MAX_REDRAWS = 10


@dataclass(frozen=True)
class Model:
    """A prior + simulator + summary map: what the ratio estimator consumes."""

    spec: ModelSpec
    summary_spec: SummaryMapSpec
    observed: object = None  # bound observed dataset, for maps that use it

    @property
    def param_names(self) -> tuple[str, ...]:
        return self.spec.param_names

    @property
    def prior_bounds(self) -> np.ndarray:
        return np.asarray(self.spec.prior_bounds, dtype=float)

    def bind(self, observed) -> "Model":
        """Attach the observed dataset (needed by observed-referencing maps)."""
        return Model(self.spec, self.summary_spec, observed)

    def summary_map(self) -> SummaryMap:
        if self.summary_spec.needs_observed and self.observed is None:
            raise ConfigError(
                "this summary map references the observed data; call Model.bind(x0) first"
            )
        return make_summary_map(self.summary_spec, observed=self.observed)

    def in_support(self, theta) -> bool:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        b = self.prior_bounds
        return bool(np.all(theta >= b[:, 0]) and np.all(theta <= b[:, 1]))

    def log_prior_density(self, theta) -> float:
        if not self.in_support(theta):
            return -np.inf
        widths = self.prior_bounds[:, 1] - self.prior_bounds[:, 0]
        widths = widths[widths > 0]
        return float(-np.sum(np.log(widths))) if widths.size else 0.0


@dataclass(frozen=True)
class MarginalBank:
    """Summaries of draws from the prior-predictive distribution."""

    summaries: np.ndarray  # (n_m, b)
    thetas: np.ndarray  # (n_m, d), retained for audit
    rng: Rng  # generating stream

    def __post_init__(self):
        if self.summaries.shape[0] != self.thetas.shape[0]:
            raise ConfigError("bank summaries and thetas must align")

    @property
    def n_m(self) -> int:
        return self.summaries.shape[0]


def build_marginal_bank(model: Model, n_m: int, rng: Rng) -> MarginalBank:
    """n_m draws theta ~ prior, x ~ p(x|theta), summarized.

    Diverged simulations are redrawn (new theta and data) up to a retry
    cap per slot; persistent failure raises.
    """
    if n_m < 1:
        raise ConfigError("n_m must be >= 1")
    smap = model.summary_map()
    thetas = np.empty((n_m, model.prior_bounds.shape[0]))
    datasets = []
    n_diverged = 0
    for i in range(n_m):
        for attempt in range(_MAX_REDRAWS):
            sub = rng.substream("marginal", i, attempt)
            theta = sample_prior(model.spec, 1, sub.substream("theta"))[0]
            try:
                x = simulate_dataset(model.spec, theta, sub.substream("data"))
            except SimulationDivergedError:
                n_diverged += 1
                continue
            thetas[i] = theta
            datasets.append(x)
            break
        else:
            raise SimulationDivergedError(
                -1, f"marginal draw {i} kept diverging after {_MAX_REDRAWS} redraws"
            )
    if n_diverged:
        logger.warning("marginal bank: redrew %d diverged simulations", n_diverged)
    summaries = smap.apply_batch(np.stack([np.asarray(d) for d in datasets]), rng.substream("marginal-noise"))
    return MarginalBank(summaries, thetas, rng)


def _simulate_class_summaries(model: Model, smap: SummaryMap, theta, n: int, rng: Rng) -> np.ndarray:
    """n summarized datasets at a fixed theta, redrawing diverged runs."""
    kept = []
    got = 0
    for attempt in range(_MAX_REDRAWS):
        batch, bad = simulate_batch(model.spec, theta, n - got, rng.substream("sim", attempt))
        if np.any(bad):
            logger.warning(
                "theta=%s: %d/%d simulations diverged on attempt %d",
                np.asarray(theta).tolist(), int(bad.sum()), n - got, attempt,
            )
            batch = batch[~bad]
        kept.append(np.asarray(batch))
        got += batch.shape[0]
        if got == n:
            break
    else:
        raise SimulationDivergedError(
            -1, f"could not complete {n} simulations at theta={theta} "
            f"after {_MAX_REDRAWS} attempts"
        )
    stacked = kept[0] if len(kept) == 1 else np.concatenate(kept, axis=0)
    return smap.apply_batch(stacked, rng.substream("noise"))


def log_ratio_at(
    model: Model, theta, bank: MarginalBank, n_theta: int, rng: Rng
) -> RatioFit:
    """Simulate the theta class, fit the penalized classifier against the
    bank, and return the estimated log-ratio coefficients."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if not model.in_support(theta):
        raise ConfigError(f"theta {theta.tolist()} lies outside the prior box")
    smap = model.summary_map()
    theta_summ = _simulate_class_summaries(model, smap, theta, n_theta, rng)
    design = Design(theta_summ, bank.summaries)
    fit = fit_ratio(design, rng.substream("fit"))
    check = ratio_self_consistency(fit, bank)
    if not 0.2 <= check <= 5.0:
        logger.debug(
            "theta=%s: bank-mean of the ratio is %.3g (outside [0.2, 5]); "
            "fit may be untrustworthy", theta.tolist(), check,
        )
    return fit


def ratio_self_consistency(fit: RatioFit, bank: MarginalBank) -> float:
    """Bank-empirical mean of exp(h); near 1 for a healthy density ratio."""
    h = fit.log_ratio(bank.summaries)
    return float(np.exp(logsumexp(np.clip(h, -700.0, 700.0)) - np.log(bank.n_m)))


# ---------------------------------------------------------------------------
# Posterior containers


def _grid_axes(axes) -> tuple[np.ndarray, ...]:
    out = []
    for ax in axes:
        ax = np.asarray(ax, dtype=float)
        if ax.ndim != 1 or ax.size < 2:
            raise ConfigError("each grid axis needs at least two nodes")
        d = np.diff(ax)
        if np.any(d <= 0):
            raise ConfigError("grid axes must be strictly increasing")
        if not np.allclose(d, d[0], rtol=1e-8, atol=0.0):
            raise ConfigError("grid axes must be uniformly spaced")
        out.append(ax)
    return tuple(out)


@dataclass(frozen=True)
class GridPosterior:
    """Normalized posterior values on a rectangular parameter grid."""

    axes: tuple[np.ndarray, ...]
    log_values: np.ndarray  # unnormalized log posterior at nodes
    posterior: np.ndarray  # normalized: sum(posterior) * cell == 1
    cell: float

    def __post_init__(self):
        shape = tuple(len(ax) for ax in self.axes)
        if self.log_values.shape != shape or self.posterior.shape != shape:
            raise ConfigError("grid value shapes must match the axes")
        if np.any(self.posterior < 0):
            raise ConfigError("posterior values must be nonnegative")
        total = float(self.posterior.sum() * self.cell)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"grid posterior integrates to {total}, not 1")

    @classmethod
    def from_log_values(cls, axes, log_values: np.ndarray) -> "GridPosterior":
        axes = _grid_axes(axes)
        cell = float(np.prod([ax[1] - ax[0] for ax in axes]))
        log_values = np.asarray(log_values, dtype=float)
        finite = np.isfinite(log_values)
        if not finite.any():
            raise DegeneratePosteriorError("every grid node underflowed to zero")
        log_z = logsumexp(log_values[finite]) + np.log(cell)
        with np.errstate(under="ignore"):
            posterior = np.exp(log_values - log_z)
        posterior[~finite] = 0.0
        # exact renormalization absorbs the tiny float drift of exp/sum
        posterior /= posterior.sum() * cell
        return cls(axes, log_values, posterior, cell)

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class WeightedSample:
    """Parameter draws with self-normalized importance weights."""

    particles: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,), nonnegative, sums to 1
    log_weights: np.ndarray  # unnormalized

    def __post_init__(self):
        if self.particles.shape[0] != self.weights.shape[0]:
            raise ConfigError("particles and weights must align")
        if np.any(self.weights < 0):
            raise ConfigError("weights must be nonnegative")

    @classmethod
    def from_log_weights(cls, particles: np.ndarray, log_weights: np.ndarray) -> "WeightedSample":
        particles = np.atleast_2d(np.asarray(particles, dtype=float))
        log_weights = np.asarray(log_weights, dtype=float)
        finite = np.isfinite(log_weights)
        if not finite.any():
            raise DegeneratePosteriorError("all importance weights are zero")
        with np.errstate(under="ignore"):
            w = np.exp(log_weights - logsumexp(log_weights[finite]))
        w[~finite] = 0.0
        w /= w.sum()
        return cls(particles, w, log_weights)

    @property
    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights**2))


# ---------------------------------------------------------------------------
# Pipelines

_WORKER_CTX: dict | None = None


def _init_worker(ctx):
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _node_task(indices):
    ctx = _WORKER_CTX
    evaluator = ctx["evaluator"]
    return [evaluator(ctx, idx) for idx in indices]


def _ratio_evaluator(ctx, idx: int):
    model = ctx["model"]
    theta = ctx["thetas"][idx]
    rng = ctx["rng"].substream(ctx["tag"], idx)
    if not model.in_support(theta):
        return idx, -np.inf
    try:
        fit = log_ratio_at(model, theta, ctx["bank"], ctx["n_theta"], rng)
    except SimulationDivergedError:
        logger.warning("node %d at theta=%s diverged persistently; assigning "
                       "posterior 0", idx, np.asarray(theta).tolist())
        return idx, -np.inf
    return idx, float(fit.log_ratio(ctx["psi0"]))


def _run_nodes(ctx, n_nodes: int, workers: int) -> list:
    indices = np.arange(n_nodes)
    if workers <= 1:
        _init_worker(ctx)
        return _node_task(indices)
    chunks = np.array_split(indices, min(workers * 4, n_nodes))
    results = []
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(ctx,)) as ex:
        for part in ex.map(_node_task, chunks):
            results.extend(part)
    return results


def posterior_on_grid(
    model: Model,
    x0,
    grid_axes,
    n_theta: int,
    n_m: int,
    rng: Rng,
    *,
    workers: int = 1,
    bank: MarginalBank | None = None,
) -> GridPosterior:
    """Estimated posterior on a rectangular grid (Algorithm: one ratio fit
    per node, then log-sum-exp normalization over the grid)."""
    model = model.bind(x0) if model.summary_spec.needs_observed else model
    axes = _grid_axes(grid_axes)
    if bank is None:
        bank = build_marginal_bank(model, n_m, rng.substream("bank"))
    smap = model.summary_map()
    psi0 = smap.apply(x0, rng.substream("obs-noise"))
    mesh = np.meshgrid(*axes, indexing="ij")
    thetas = np.stack([m.ravel() for m in mesh], axis=1)
    ctx = {
        "model": model, "thetas": thetas, "bank": bank, "psi0": psi0,
        "n_theta": n_theta, "rng": rng, "tag": "node", "evaluator": _ratio_evaluator,
    }
    results = _run_nodes(ctx, thetas.shape[0], workers)
    log_values = np.empty(thetas.shape[0])
    for idx, h0 in results:
        log_values[idx] = h0 + model.log_prior_density(thetas[idx])
    shape = tuple(len(ax) for ax in axes)
    return GridPosterior.from_log_values(axes, log_values.reshape(shape))


def importance_posterior(
    model: Model,
    x0,
    n_particles: int,
    n_theta: int,
    n_m: int,
    rng: Rng,
    *,
    workers: int = 1,
    bank: MarginalBank | None = None,
) -> WeightedSample:
    """Prior particles weighted by the estimated ratio at the observed data
    (one generation of importance sampling; the prior cancels)."""
    if n_particles < 1:
        raise ConfigError("n_particles must be >= 1")
    model = model.bind(x0) if model.summary_spec.needs_observed else model
    if bank is None:
        bank = build_marginal_bank(model, n_m, rng.substream("bank"))
    smap = model.summary_map()
    psi0 = smap.apply(x0, rng.substream("obs-noise"))
    particles = sample_prior(model.spec, n_particles, rng.substream("particles"))
    ctx = {
        "model": model, "thetas": particles, "bank": bank, "psi0": psi0,
        "n_theta": n_theta, "rng": rng, "tag": "particle", "evaluator": _ratio_evaluator,
    }
    results = _run_nodes(ctx, n_particles, workers)
    log_w = np.empty(n_particles)
    for idx, h0 in results:
        log_w[idx] = h0
    return WeightedSample.from_log_weights(particles, log_w)


def posterior_moments(obj) -> tuple[np.ndarray, np.ndarray]:
    """(mean, std) per parameter, by weighted sample or grid quadrature."""
    if isinstance(obj, WeightedSample):
        w = obj.weights
        theta = obj.particles
    elif isinstance(obj, GridPosterior):
        w = obj.posterior.ravel() * obj.cell
        theta = obj.nodes()
    else:
        raise ConfigError(f"cannot compute moments of {type(obj)!r}")
    mean = w @ theta
    var = w @ (theta - mean) ** 2
    return mean, np.sqrt(var)


# ---------------------------------------------------------------------------
# CSV formats


def grid_to_csv(gp: GridPosterior, param_names, path) -> None:
    """Rows in row-major node order: parameters, log value, posterior."""
    names = list(param_names)
    nodes = gp.nodes()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["log_value", "posterior"])
        lv = gp.log_values.ravel()
        po = gp.posterior.ravel()
        for i in range(nodes.shape[0]):
            w.writerow(
                [repr(float(v)) for v in nodes[i]]
                + [repr(float(lv[i])), repr(float(po[i]))]
            )


def grid_from_csv(path) -> GridPosterior:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = len(header) - 2
    data = np.array([[float(v) for v in r] for r in body])
    axes = tuple(np.unique(data[:, j]) for j in range(d))
    shape = tuple(len(ax) for ax in axes)
    if int(np.prod(shape)) != data.shape[0]:
        raise ConfigError(f"{path}: node rows do not form a rectangular grid")
    log_values = data[:, d].reshape(shape)
    gp = GridPosterior.from_log_values(axes, log_values)
    if not np.allclose(gp.posterior.ravel(), data[:, d + 1], rtol=1e-9, atol=1e-300):
        raise ConfigError(f"{path}: stored posterior column is inconsistent")
    return gp


def sample_to_csv(ws: WeightedSample, param_names, path) -> None:
    names = list(param_names)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["weight", "log_weight"])
        for i in range(ws.particles.shape[0]):
            w.writerow(
                [repr(float(v)) for v in ws.particles[i]]
                + [repr(float(ws.weights[i])), repr(float(ws.log_weights[i]))]
            )


def sample_from_csv(path) -> WeightedSample:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = len(header) - 2
    data = np.array([[float(v) for v in r] for r in body])
    return WeightedSample.from_log_weights(data[:, :d], data[:, d + 1])
