"""Summary-statistic maps: the basis functions of the log-ratio model.

Each benchmark model has a base map, optionally expanded with pairwise
products (plus a constant) or an element-wise square block, and optionally
augmented with pure-noise columns for robustness experiments.  A fixed map
always yields the same dimension and name ordering.

Normalization convention: every (auto/cross) covariance divides by the
number of time samples, not by (samples - lag).  Any fixed convention
works because the same map is applied to simulated and observed data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateInputError, SimulationDivergedError
from .rng import Rng

_SINGULAR_TOL = 1e-10


@dataclass(frozen=True)
class SummaryVector:
    """A named vector of summary statistics."""

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.shape[0] != len(self.names):
            raise ConfigError("values and names must align")
        if len(set(self.names)) != len(self.names):
            raise ConfigError("summary names must be unique")
        if not np.all(np.isfinite(values)):
            raise DegenerateInputError("summary vector contains non-finite entries")

    def __len__(self):
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# Elementary statistics


def autocorrelation(series, lag: int) -> float:
    """Sample autocorrelation at the given lag.

    sum_t (x_t - xbar)(x_{t+lag} - xbar) / sum_t (x_t - xbar)^2
    """
    x = np.asarray(series, dtype=float)
    if lag < 0:
        raise ConfigError("lag must be nonnegative")
    if x.size <= lag:
        raise ConfigError("series must be longer than the lag")
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom <= 0.0:
        raise DegenerateInputError("zero-variance series has no autocorrelation")
    if lag == 0:
        return 1.0
    return float(xc[:-lag] @ xc[lag:]) / denom


def _autocorr_block(batch: np.ndarray, n_lags: int) -> np.ndarray:
    """Autocorrelations at lags 1..n_lags for each row of (n, T)."""
    xc = batch - batch.mean(axis=1, keepdims=True)
    denom = np.einsum("ij,ij->i", xc, xc)
    if np.any(denom <= 0.0):
        raise DegenerateInputError("zero-variance series has no autocorrelation")
    out = np.empty((batch.shape[0], n_lags))
    for lag in range(1, n_lags + 1):
        out[:, lag - 1] = np.einsum("ij,ij->i", xc[:, :-lag], xc[:, lag:]) / denom
    return out


def _autocov_block(batch: np.ndarray, n_lags: int) -> np.ndarray:
    """Autocovariances at lags 1..n_lags, divided by the series length."""
    T = batch.shape[1]
    xc = batch - batch.mean(axis=1, keepdims=True)
    out = np.empty((batch.shape[0], n_lags))
    for lag in range(1, n_lags + 1):
        out[:, lag - 1] = np.einsum("ij,ij->i", xc[:, :-lag], xc[:, lag:]) / T
    return out


def _pairwise_index(d: int):
    # row-major lower triangle: (0,0), (1,0), (1,1), (2,0), ...
    return np.tril_indices(d)


# ---------------------------------------------------------------------------
# Expansions


def expand_pairwise(phi: SummaryVector) -> SummaryVector:
    """(phi, all products phi_k*phi_k' for k >= k', constant 1).

    Output dimension d + d(d+1)/2 + 1; linear terms keep their input
    order, products follow in row-major lower-triangular order.
    """
    d = len(phi)
    rows, cols = _pairwise_index(d)
    values = np.concatenate([phi.values, phi.values[rows] * phi.values[cols], [1.0]])
    names = (
        phi.names
        + tuple(f"{phi.names[r]}*{phi.names[c]}" for r, c in zip(rows, cols))
        + ("const",)
    )
    return SummaryVector(values, names)


def cell_square_expand(phi: SummaryVector) -> SummaryVector:
    """(phi, phi^2 element-wise, constant 1)."""
    values = np.concatenate([phi.values, phi.values**2, [1.0]])
    names = phi.names + tuple(f"{n}^2" for n in phi.names) + ("const",)
    return SummaryVector(values, names)


def _expand_pairwise_batch(block: np.ndarray) -> np.ndarray:
    rows, cols = _pairwise_index(block.shape[1])
    const = np.ones((block.shape[0], 1))
    return np.concatenate([block, block[:, rows] * block[:, cols], const], axis=1)


def _square_batch(block: np.ndarray) -> np.ndarray:
    const = np.ones((block.shape[0], 1))
    return np.concatenate([block, block**2, const], axis=1)


# ---------------------------------------------------------------------------
# Model-specific maps


def polynomial_summaries(x: float, degree: int) -> SummaryVector:
    """(1, x, x^2, ..., x^degree)."""
    if degree < 0:
        raise ConfigError("degree must be nonnegative")
    values = float(x) ** np.arange(degree + 1)
    return SummaryVector(values, tuple(f"x^{k}" for k in range(degree + 1)))


def _polynomial_batch(x: np.ndarray, degree: int) -> np.ndarray:
    return np.asarray(x, dtype=float)[:, None] ** np.arange(degree + 1)[None, :]


_ARCH_ACORR_NAMES = tuple(f"ac{k}" for k in range(1, 6))


def _arch_names(noise_dims: int) -> tuple[str, ...]:
    rows, cols = _pairwise_index(5)
    names = _ARCH_ACORR_NAMES
    names += tuple(
        f"{_ARCH_ACORR_NAMES[r]}*{_ARCH_ACORR_NAMES[c]}" for r, c in zip(rows, cols)
    )
    names += ("mean", "var", "const")
    names += tuple(f"noise{k + 1}" for k in range(noise_dims))
    return names


def _arch_batch(batch: np.ndarray, noise_dims: int, rng: Rng | None) -> np.ndarray:
    if batch.shape[1] < 6:
        raise ConfigError("ARCH summaries need a series of length >= 6")
    ac = _autocorr_block(batch, 5)
    rows, cols = _pairwise_index(5)
    n = batch.shape[0]
    blocks = [
        ac,
        ac[:, rows] * ac[:, cols],
        batch.mean(axis=1)[:, None],
        batch.var(axis=1)[:, None],
        np.ones((n, 1)),
    ]
    if noise_dims:
        if rng is None:
            raise ConfigError("noise augmentation needs an rng stream")
        blocks.append(rng.generator().standard_normal((n, noise_dims)))
    return np.concatenate(blocks, axis=1)


def arch_summaries(series, spec: "SummaryMapSpec | None" = None, rng: Rng | None = None) -> SummaryVector:
    """Autocorrelations (lags 1-5), their pairwise products, mean, variance,
    a constant, and optionally appended white-noise columns.

    Products are taken over the five autocorrelations only; mean and
    variance enter raw.
    """
    noise_dims = 0 if spec is None else spec.noise_dims
    values = _arch_batch(np.asarray(series, dtype=float)[None, :], noise_dims, rng)[0]
    return SummaryVector(values, _arch_names(noise_dims))


_WOOD_NAMES = (
    ("mean", "n_zero")
    + tuple(f"acov{k}" for k in range(1, 6))
    + tuple(f"cub{k}" for k in range(4))
    + ("pw1", "pw2")
)


def _wood_cubic_design(observed: np.ndarray) -> np.ndarray:
    s = np.sort(np.diff(np.asarray(observed, dtype=float)))
    design = np.column_stack([np.ones_like(s), s, s**2, s**3])
    sv = np.linalg.svd(design, compute_uv=False)
    if sv[-1] <= _SINGULAR_TOL * sv[0]:
        raise DegenerateInputError(
            "cubic regression block: ordered differences of the observed series "
            "give a singular design"
        )
    return design


def _power_block(batch: np.ndarray) -> np.ndarray:
    """Least-squares (b1, b2) of (y_{t+1})^0.3 = b1 (y_t)^0.3 + b2 (y_t)^0.6."""
    u = batch[:, :-1].astype(float)
    a1, a2 = u**0.3, u**0.6
    b = batch[:, 1:].astype(float) ** 0.3
    g11 = np.einsum("ij,ij->i", a1, a1)
    g12 = np.einsum("ij,ij->i", a1, a2)
    g22 = np.einsum("ij,ij->i", a2, a2)
    r1 = np.einsum("ij,ij->i", a1, b)
    r2 = np.einsum("ij,ij->i", a2, b)
    det = g11 * g22 - g12 * g12
    scale = g11 * g22
    out = np.zeros((batch.shape[0], 2))
    ok = det > _SINGULAR_TOL * np.maximum(scale, 1e-300)
    out[ok, 0] = (g22[ok] * r1[ok] - g12[ok] * r2[ok]) / det[ok]
    out[ok, 1] = (g11[ok] * r2[ok] - g12[ok] * r1[ok]) / det[ok]
    bad = ~ok
    if np.any(bad):
        # all-zero design with all-zero response is trivially consistent;
        # its minimum-norm solution is (0, 0)
        zero_sys = (scale[bad] == 0.0) & (np.einsum("ij,ij->i", b, b)[bad] == 0.0)
        if not np.all(zero_sys):
            raise DegenerateInputError(
                "power regression block: singular design (constant series)"
            )
    return out


def _wood_batch(batch: np.ndarray, observed: np.ndarray, cubic_design: np.ndarray | None = None) -> np.ndarray:
    batch = np.atleast_2d(batch)
    observed = np.asarray(observed)
    if batch.shape[1] != observed.shape[0]:
        raise ConfigError("series and observed series must have equal length")
    if batch.shape[1] < 7:
        raise ConfigError("Wood summaries need series of length >= 7")
    if cubic_design is None:
        cubic_design = _wood_cubic_design(observed)
    y = batch.astype(float)
    mean = y.mean(axis=1)
    n_zero = (batch == 0).sum(axis=1).astype(float)
    acov = _autocov_block(y, 5)
    responses = np.sort(np.diff(y, axis=1), axis=1)
    cubic, *_ = np.linalg.lstsq(cubic_design, responses.T, rcond=None)
    power = _power_block(batch)
    return np.concatenate(
        [mean[:, None], n_zero[:, None], acov, cubic.T, power], axis=1
    )


def ricker_wood_summaries(series, observed) -> SummaryVector:
    """The 13 statistics for count series: mean, number of zeros,
    autocovariances at lags 1-5, the four coefficients of a cubic
    regression of the sorted first differences on those of the observed
    series, and the two power-model regression coefficients.
    """
    values = _wood_batch(np.asarray(series)[None, :], observed)[0]
    return SummaryVector(values, _WOOD_NAMES)


_HAK_NAMES = ("mean", "var", "acov1", "cov_nbr", "xcov_prev", "xcov_next")


def _hakkarainen_single(traj: np.ndarray) -> np.ndarray:
    traj = np.asarray(traj, dtype=float)
    K, n_t = traj.shape
    if K < 3:
        raise ConfigError("need at least 3 sites")
    if n_t < 3:
        raise ConfigError("need at least 3 time points")
    if not np.all(np.isfinite(traj)):
        step = int(np.argwhere(~np.isfinite(traj).all(axis=0))[0, 0])
        raise SimulationDivergedError(step, f"trajectory non-finite at time index {step}")
    xc = traj - traj.mean(axis=1, keepdims=True)
    up = np.roll(xc, -1, axis=0)  # site k+1
    down = np.roll(xc, 1, axis=0)  # site k-1
    mean = traj.mean(axis=1)
    var = np.einsum("kt,kt->k", xc, xc) / n_t
    acov1 = np.einsum("kt,kt->k", xc[:, :-1], xc[:, 1:]) / n_t
    cov_nbr = np.einsum("kt,kt->k", xc, up) / n_t
    xcov_prev = np.einsum("kt,kt->k", xc[:, :-1], down[:, 1:]) / n_t
    xcov_next = np.einsum("kt,kt->k", xc[:, :-1], up[:, 1:]) / n_t
    return np.array(
        [mean.mean(), var.mean(), acov1.mean(), cov_nbr.mean(), xcov_prev.mean(), xcov_next.mean()]
    )


def lorenz_hakkarainen_summaries(traj) -> SummaryVector:
    """Six site-averaged statistics of a K x (T+1) trajectory: mean,
    variance, lag-1 autocovariance, same-time neighbour covariance, and the
    lag-1 cross-covariances with the two neighbours (cyclic indexing).
    """
    return SummaryVector(_hakkarainen_single(np.asarray(traj)), _HAK_NAMES)


# ---------------------------------------------------------------------------
# Map spec and concrete maps

_BASES = (
    "gaussian-poly",
    "gaussian-identity",
    "arch",
    "arch-acorr",
    "arch-raw",
    "arch-raw-logvar",
    "ricker-wood",
    "lorenz-hakkarainen",
    "external-matrix",
)


@dataclass(frozen=True)
class SummaryMapSpec:
    """Recipe for a summary map: base statistics + expansions + noise."""

    base: str
    pairwise: bool = False
    square: bool = False
    constant: bool = False
    noise_dims: int = 0
    poly_degree: int = 9
    external_dim: int | None = None

    def __post_init__(self):
        if self.base not in _BASES:
            raise ConfigError(f"unknown summary base {self.base!r}; expected one of {_BASES}")
        if self.noise_dims < 0:
            raise ConfigError("noise_dims must be nonnegative")
        if self.pairwise and self.square:
            raise ConfigError("choose at most one of pairwise/square expansion")
        if self.constant and (self.pairwise or self.square):
            raise ConfigError("pairwise/square expansions already append a constant")
        if self.base == "external-matrix" and not self.external_dim:
            raise ConfigError("external-matrix maps need an explicit external_dim")
        if self.base == "gaussian-poly" and self.poly_degree < 0:
            raise ConfigError("poly_degree must be nonnegative")

    @property
    def needs_observed(self) -> bool:
        return self.base == "ricker-wood"


class SummaryMap:
    """A concrete map from datasets to fixed-dimension summary vectors."""

    def __init__(self, spec: SummaryMapSpec, observed=None):
        self.spec = spec
        self._cubic_design = None
        if spec.needs_observed:
            if observed is None:
                raise ConfigError(f"summary base {spec.base!r} needs the observed dataset")
            self._observed = np.asarray(observed)
            self._cubic_design = _wood_cubic_design(self._observed)
        base_names = {
            "gaussian-poly": tuple(f"x^{k}" for k in range(spec.poly_degree + 1)),
            "gaussian-identity": ("x",),
            "arch": _ARCH_ACORR_NAMES
            + tuple(
                f"{_ARCH_ACORR_NAMES[r]}*{_ARCH_ACORR_NAMES[c]}"
                for r, c in zip(*_pairwise_index(5))
            )
            + ("mean", "var", "const"),
            "arch-acorr": _ARCH_ACORR_NAMES,
            "arch-raw": _ARCH_ACORR_NAMES + ("mean", "var"),
            "arch-raw-logvar": _ARCH_ACORR_NAMES + ("mean", "log_var"),
            "ricker-wood": _WOOD_NAMES,
            "lorenz-hakkarainen": _HAK_NAMES,
            "external-matrix": tuple(f"s{k + 1}" for k in range(spec.external_dim or 0)),
        }[spec.base]
        names = SummaryVector(np.zeros(len(base_names)), base_names)
        if spec.pairwise:
            names = expand_pairwise(names)
        elif spec.square:
            names = cell_square_expand(names)
        elif spec.constant:
            names = SummaryVector(np.zeros(len(names) + 1), names.names + ("const",))
        self.names: tuple[str, ...] = names.names + tuple(
            f"noise{k + 1}" for k in range(spec.noise_dims)
        )

    @property
    def dim(self) -> int:
        return len(self.names)

    def apply_batch(self, datasets, rng: Rng | None = None) -> np.ndarray:
        """Summaries for a batch of datasets, shape (n, dim)."""
        spec = self.spec
        if spec.base == "gaussian-poly":
            block = _polynomial_batch(np.asarray(datasets, dtype=float).reshape(-1), spec.poly_degree)
        elif spec.base == "gaussian-identity":
            block = np.asarray(datasets, dtype=float).reshape(-1, 1)
        elif spec.base == "arch":
            return self._with_noise(
                _arch_batch(np.atleast_2d(np.asarray(datasets, dtype=float)), 0, None), rng
            )
        elif spec.base == "arch-acorr":
            block = _autocorr_block(np.atleast_2d(np.asarray(datasets, dtype=float)), 5)
        elif spec.base in ("arch-raw", "arch-raw-logvar"):
            series = np.atleast_2d(np.asarray(datasets, dtype=float))
            variance = series.var(axis=1)
            # the raw variance is extremely heavy-tailed under the prior
            # predictive (its scale is driven by theta2 -> 1); the log
            # variant keeps it usable inside standardized distances
            if spec.base == "arch-raw-logvar":
                variance = np.log(variance)
            block = np.concatenate(
                [
                    _autocorr_block(series, 5),
                    series.mean(axis=1)[:, None],
                    variance[:, None],
                ],
                axis=1,
            )
        elif spec.base == "ricker-wood":
            block = _wood_batch(np.atleast_2d(datasets), self._observed, self._cubic_design)
        elif spec.base == "lorenz-hakkarainen":
            arr = np.asarray(datasets, dtype=float)
            if arr.ndim == 2:
                arr = arr[None, :, :]
            block = np.stack([_hakkarainen_single(t) for t in arr])
        else:  # external-matrix
            block = np.atleast_2d(np.asarray(datasets, dtype=float))
            if block.shape[1] != spec.external_dim:
                raise ConfigError(
                    f"external summary rows have dimension {block.shape[1]}, "
                    f"expected {spec.external_dim}"
                )
        if spec.pairwise:
            block = _expand_pairwise_batch(block)
        elif spec.square:
            block = _square_batch(block)
        elif spec.constant:
            block = np.concatenate([block, np.ones((block.shape[0], 1))], axis=1)
        return self._with_noise(block, rng)

    def _with_noise(self, block: np.ndarray, rng: Rng | None) -> np.ndarray:
        if self.spec.noise_dims:
            if rng is None:
                raise ConfigError("noise augmentation needs an rng stream")
            noise = rng.generator().standard_normal((block.shape[0], self.spec.noise_dims))
            block = np.concatenate([block, noise], axis=1)
        if not np.all(np.isfinite(block)):
            raise DegenerateInputError("summary map produced non-finite entries")
        return block

    def apply(self, dataset, rng: Rng | None = None) -> np.ndarray:
        if self.spec.base in ("gaussian-poly", "gaussian-identity"):
            batch = np.asarray([dataset], dtype=float)
        elif self.spec.base == "lorenz-hakkarainen":
            batch = np.asarray(dataset, dtype=float)[None, :, :]
        else:
            batch = np.asarray(dataset)[None, :]
        return self.apply_batch(batch, rng)[0]

    def summary_vector(self, dataset, rng: Rng | None = None) -> SummaryVector:
        return SummaryVector(self.apply(dataset, rng), self.names)


def make_summary_map(spec: SummaryMapSpec, observed=None) -> SummaryMap:
    return SummaryMap(spec, observed=observed)


# ---------------------------------------------------------------------------
# CSV interface


def summaries_to_csv(matrix: np.ndarray, names, path) -> None:
    """Rows = datasets, columns = statistics, with a header of names."""
    matrix = np.atleast_2d(matrix)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names))
        for row in matrix:
            w.writerow([repr(float(v)) for v in row])


def summaries_from_csv(path) -> tuple[np.ndarray, tuple[str, ...]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty summary file")
    names = tuple(rows[0])
    matrix = np.array([[float(v) for v in r] for r in rows[1:]])
    if matrix.ndim != 2 or matrix.shape[1] != len(names):
        raise ConfigError(f"{path}: malformed summary matrix")
    return matrix, names
