"""Seeded stochastic generators for the four benchmark models.

Each model gets a frozen spec dataclass (priors included) plus a
`simulate_*` function of (spec, parameters, rng).  Batch variants draw
many replicates in one call; they use the same distributions but a
different draw layout, so per-run and batch outputs are each reproducible
under their own stream but not draw-for-draw identical to each other.

Datasets are plain arrays: a scalar for the Gaussian model, a length-T
series for ARCH and Ricker, and a K x (T+1) trajectory for the
stochastically forced Lorenz-96 variant.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SimulationDivergedError
from .rng import Rng


# ---------------------------------------------------------------------------
# Model specs


@dataclass(frozen=True)
class GaussianModelSpec:
    """Univariate Gaussian with known standard deviation, unknown mean."""

    sigma_o: float = 3.0
    prior_lo: float = -20.0
    prior_hi: float = 20.0

    def __post_init__(self):
        if not self.sigma_o > 0:
            raise ConfigError("sigma_o must be positive")
        if not self.prior_lo < self.prior_hi:
            raise ConfigError("gaussian prior interval is empty")

    @property
    def param_names(self):
        return ("mu",)

    @property
    def prior_bounds(self):
        return ((self.prior_lo, self.prior_hi),)


@dataclass(frozen=True)
class ArchModelSpec:
    """AR(1) observation process with ARCH(1) innovations."""

    T: int = 100
    prior_theta1: tuple[float, float] = (-1.0, 1.0)
    prior_theta2: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.T < 2:
            raise ConfigError("ARCH series length T must be >= 2")
        for lo, hi in (self.prior_theta1, self.prior_theta2):
            if lo > hi:
                raise ConfigError("ARCH prior interval is empty")

    @property
    def param_names(self):
        return ("theta1", "theta2")

    @property
    def prior_bounds(self):
        return (tuple(self.prior_theta1), tuple(self.prior_theta2))


@dataclass(frozen=True)
class RickerModelSpec:
    """Stochastic Ricker map observed through Poisson sampling."""

    T: int = 50
    prior_log_r: tuple[float, float] = (3.0, 5.0)
    prior_sigma: tuple[float, float] = (0.0, 0.6)
    prior_phi: tuple[float, float] = (5.0, 15.0)

    def __post_init__(self):
        if self.T < 1:
            raise ConfigError("Ricker series length T must be >= 1")
        if self.prior_sigma[0] < 0 or self.prior_phi[0] < 0:
            raise ConfigError("sigma and phi priors must be nonnegative")
        for lo, hi in (self.prior_log_r, self.prior_sigma, self.prior_phi):
            if lo > hi:
                raise ConfigError("Ricker prior interval is empty")

    @property
    def param_names(self):
        return ("log_r", "sigma", "phi")

    @property
    def prior_bounds(self):
        return (tuple(self.prior_log_r), tuple(self.prior_sigma), tuple(self.prior_phi))


@functools.lru_cache(maxsize=8)
def lorenz_default_initial_state(K: int = 40, F: float = 10.0, dt: float = 0.025) -> tuple:
    """Deterministic on-attractor initial state.

    Spin up the unforced (eta = 0) system at mid-range closure parameters
    (2.0, 0.1) from a small perturbation of the constant fixed point
    y* = (F - theta1)/(1 + theta2), for 1000 RK4 steps.  The result is a
    fixed, reproducible state reused for every simulation.
    """
    theta1, theta2 = 2.0, 0.1
    y = np.full(K, (F - theta1) / (1.0 + theta2))
    y[0] += 0.01
    eta = np.zeros(K)
    for _ in range(1000):
        y = _lorenz_rk4_step(y, eta, theta1, theta2, F, dt)
    return tuple(y)


@dataclass(frozen=True)
class LorenzModelSpec:
    """Lorenz-96 slow variables with stochastic parametrized forcing."""

    K: int = 40
    F: float = 10.0
    dt: float = 0.025
    T: int = 160
    forcing_phi: float = 0.4
    initial_state: tuple = field(default=())
    prior_theta1: tuple[float, float] = (0.5, 3.5)
    prior_theta2: tuple[float, float] = (0.0, 0.3)

    def __post_init__(self):
        if self.K < 4:
            raise ConfigError("cyclic coupling needs K >= 4")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not 0.0 <= self.forcing_phi <= 1.0:
            # intended range is [0, 1); phi = 1 freezes the forcing and is
            # only useful in tests
            raise ConfigError("forcing_phi must lie in [0, 1]")
        if len(self.initial_state) == 0:
            object.__setattr__(
                self,
                "initial_state",
                lorenz_default_initial_state(self.K, self.F, self.dt),
            )
        elif len(self.initial_state) != self.K:
            raise ConfigError("initial_state must have length K")
        for lo, hi in (self.prior_theta1, self.prior_theta2):
            if lo > hi:
                raise ConfigError("Lorenz prior interval is empty")

    @property
    def param_names(self):
        return ("theta1", "theta2")

    @property
    def prior_bounds(self):
        return (tuple(self.prior_theta1), tuple(self.prior_theta2))


ModelSpec = GaussianModelSpec | ArchModelSpec | RickerModelSpec | LorenzModelSpec


# ---------------------------------------------------------------------------
# Simulators


def simulate_gaussian(spec: GaussianModelSpec, mu: float, rng: Rng) -> float:
    """One observation mu + sigma_o * z with z standard normal."""
    g = rng.generator()
    return float(mu + spec.sigma_o * g.standard_normal())


def simulate_gaussian_batch(spec: GaussianModelSpec, mu: float, n: int, rng: Rng) -> np.ndarray:
    g = rng.generator()
    return mu + spec.sigma_o * g.standard_normal(n)


def simulate_arch(spec: ArchModelSpec, theta1: float, theta2: float, rng: Rng) -> np.ndarray:
    """ARCH(1) series (y(1), ..., y(T)).

    e(0) ~ N(0,1), y(0) = 0, and for t = 1..T
    e(t) = xi(t) * sqrt(0.2 + theta2 * e(t-1)^2),  y(t) = theta1 * y(t-1) + e(t).
    """
    g = rng.generator()
    e = g.standard_normal()
    y = 0.0
    out = np.empty(spec.T)
    for t in range(spec.T):
        e = g.standard_normal() * np.sqrt(0.2 + theta2 * e * e)
        y = theta1 * y + e
        out[t] = y
    return out


def simulate_arch_batch(
    spec: ArchModelSpec, theta1: float, theta2: float, n: int, rng: Rng
) -> np.ndarray:
    g = rng.generator()
    e = g.standard_normal(n)
    y = np.zeros(n)
    out = np.empty((n, spec.T))
    for t in range(spec.T):
        e = g.standard_normal(n) * np.sqrt(0.2 + theta2 * e * e)
        y = theta1 * y + e
        out[:, t] = y
    return out


def simulate_ricker(
    spec: RickerModelSpec, log_r: float, sigma: float, phi: float, rng: Rng
) -> np.ndarray:
    """Ricker counts (y(1), ..., y(T)).

    Latent log N(t) = log_r + log N(t-1) - N(t-1) + sigma*e(t) with
    log N(0) = 0, observed y(t) ~ Poisson(phi * N(t)).
    """
    return simulate_ricker_batch(spec, log_r, sigma, phi, 1, rng)[0]


def simulate_ricker_batch(
    spec: RickerModelSpec, log_r: float, sigma: float, phi: float, n: int, rng: Rng
) -> np.ndarray:
    g = rng.generator()
    logn = np.zeros(n)
    out = np.empty((n, spec.T), dtype=np.int64)
    with np.errstate(under="ignore"):
        for t in range(spec.T):
            logn = log_r + logn - np.exp(logn) + sigma * g.standard_normal(n)
            out[:, t] = g.poisson(phi * np.exp(logn))
    return out


def _lorenz_drift(y, eta, theta1, theta2, F, axis=-1):
    ym1 = np.roll(y, 1, axis=axis)
    ym2 = np.roll(y, 2, axis=axis)
    yp1 = np.roll(y, -1, axis=axis)
    return -ym1 * (ym2 - yp1) - y + F - theta1 - theta2 * y + eta


def _lorenz_rk4_step(y, eta, theta1, theta2, F, dt, axis=-1):
    k1 = _lorenz_drift(y, eta, theta1, theta2, F, axis)
    k2 = _lorenz_drift(y + 0.5 * dt * k1, eta, theta1, theta2, F, axis)
    k3 = _lorenz_drift(y + 0.5 * dt * k2, eta, theta1, theta2, F, axis)
    k4 = _lorenz_drift(y + dt * k3, eta, theta1, theta2, F, axis)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate_lorenz(
    spec: LorenzModelSpec,
    theta1: float,
    theta2: float,
    rng: Rng,
    *,
    initial_state: np.ndarray | None = None,
    n_steps: int | None = None,
) -> np.ndarray:
    """Forced Lorenz-96 trajectory, shape K x (T+1) including the start.

    The forcing eta_k is an AR(1) process updated between RK4 steps and
    held constant within each step:
    eta(0) = sqrt(1-phi^2) e(0),  eta(t+dt) = phi*eta(t) + sqrt(1-phi^2) e(t).

    Raises
    ------
    SimulationDivergedError
        If the state becomes non-finite, with the offending step index.
    """
    traj, diverged = simulate_lorenz_batch(
        spec, theta1, theta2, 1, rng, initial_state=initial_state, n_steps=n_steps
    )
    if diverged[0] >= 0:
        raise SimulationDivergedError(int(diverged[0]))
    return traj[0]


def simulate_lorenz_batch(
    spec: LorenzModelSpec,
    theta1: float,
    theta2: float,
    n: int,
    rng: Rng,
    *,
    initial_state: np.ndarray | None = None,
    n_steps: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """n trajectories at once; returns (traj (n,K,T+1), diverged_step (n,)).

    diverged_step is -1 for clean runs, else the first step index whose
    state was non-finite (that row is NaN from there on).
    """
    g = rng.generator()
    K, F, dt, phi = spec.K, spec.F, spec.dt, spec.forcing_phi
    T = spec.T if n_steps is None else int(n_steps)
    if initial_state is None:
        initial_state = np.asarray(spec.initial_state, dtype=float)
    y = np.broadcast_to(np.asarray(initial_state, dtype=float), (n, K)).copy()

    innov = np.sqrt(1.0 - phi * phi)
    eta = innov * g.standard_normal((n, K))
    traj = np.empty((n, K, T + 1))
    traj[:, :, 0] = y
    diverged = np.full(n, -1, dtype=np.int64)
    with np.errstate(all="ignore"):
        for t in range(1, T + 1):
            y = _lorenz_rk4_step(y, eta, theta1, theta2, F, dt, axis=1)
            bad = ~np.all(np.isfinite(y), axis=1)
            newly = bad & (diverged < 0)
            if np.any(newly):
                diverged[newly] = t
                y[newly] = np.nan
            traj[:, :, t] = y
            eta = phi * eta + innov * g.standard_normal((n, K))
    return traj, diverged


def sample_prior(spec: ModelSpec, n: int, rng: Rng) -> np.ndarray:
    """n independent draws from the model's uniform prior box, shape (n, d)."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    g = rng.generator()
    bounds = np.asarray(spec.prior_bounds, dtype=float)
    u = g.random((n, bounds.shape[0]))
    return bounds[:, 0] + u * (bounds[:, 1] - bounds[:, 0])


def simulate_dataset(spec: ModelSpec, theta, rng: Rng):
    """Dispatch on spec type; theta is a sequence in spec.param_names order."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if isinstance(spec, GaussianModelSpec):
        return simulate_gaussian(spec, theta[0], rng)
    if isinstance(spec, ArchModelSpec):
        return simulate_arch(spec, theta[0], theta[1], rng)
    if isinstance(spec, RickerModelSpec):
        return simulate_ricker(spec, theta[0], theta[1], theta[2], rng)
    if isinstance(spec, LorenzModelSpec):
        return simulate_lorenz(spec, theta[0], theta[1], rng)
    raise ConfigError(f"unknown model spec {type(spec)!r}")


def simulate_batch(spec: ModelSpec, theta, n: int, rng: Rng):
    """Batch dispatch; returns (datasets, diverged_mask).

    datasets is an array whose first axis indexes replicates; diverged_mask
    is a boolean (n,) array, all-False for models that cannot diverge.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if isinstance(spec, GaussianModelSpec):
        return simulate_gaussian_batch(spec, theta[0], n, rng), np.zeros(n, dtype=bool)
    if isinstance(spec, ArchModelSpec):
        return simulate_arch_batch(spec, theta[0], theta[1], n, rng), np.zeros(n, dtype=bool)
    if isinstance(spec, RickerModelSpec):
        return (
            simulate_ricker_batch(spec, theta[0], theta[1], theta[2], n, rng),
            np.zeros(n, dtype=bool),
        )
    if isinstance(spec, LorenzModelSpec):
        traj, diverged = simulate_lorenz_batch(spec, theta[0], theta[1], n, rng)
        return traj, diverged >= 0
    raise ConfigError(f"unknown model spec {type(spec)!r}")


# ---------------------------------------------------------------------------
# Dataset CSV round trip (one row per time index, columns = variables)


def dataset_to_csv(spec: ModelSpec, dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if isinstance(spec, GaussianModelSpec):
            w.writerow(["x"])
            w.writerow([repr(float(dataset))])
        elif isinstance(spec, (ArchModelSpec, RickerModelSpec)):
            w.writerow(["y"])
            for v in np.asarray(dataset).ravel():
                w.writerow([repr(float(v))])
        elif isinstance(spec, LorenzModelSpec):
            w.writerow([f"y{k + 1}" for k in range(spec.K)])
            traj = np.asarray(dataset)
            for t in range(traj.shape[1]):
                w.writerow([repr(float(v)) for v in traj[:, t]])
        else:
            raise ConfigError(f"unknown model spec {type(spec)!r}")


def dataset_from_csv(spec: ModelSpec, path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    if isinstance(spec, GaussianModelSpec):
        if len(body) != 1 or len(body[0]) != 1:
            raise ConfigError(f"{path}: expected a single scalar observation")
        return float(body[0][0])
    if isinstance(spec, (ArchModelSpec, RickerModelSpec)):
        values = np.array([float(r[0]) for r in body])
        if values.shape[0] != spec.T:
            raise ConfigError(f"{path}: expected {spec.T} rows, found {values.shape[0]}")
        if isinstance(spec, RickerModelSpec):
            return values.astype(np.int64)
        return values
    if isinstance(spec, LorenzModelSpec):
        traj = np.array([[float(v) for v in r] for r in body]).T
        if traj.shape != (spec.K, spec.T + 1):
            raise ConfigError(
                f"{path}: expected {spec.K} x {spec.T + 1} trajectory, found {traj.shape}"
            )
        return traj
    raise ConfigError(f"unknown model spec {type(spec)!r}")
