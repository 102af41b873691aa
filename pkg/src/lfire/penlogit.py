"""Penalized logistic regression between model-conditional and marginal
summary samples: the estimator of the log density ratio.

Conventions
-----------
The ratio parametrization writes h(x) = intercept + beta'psi(x) for the
log-ratio estimate; the class-imbalance factor nu = n_m/n_theta enters the
loss.  Internally everything reduces to a plain logistic classifier with
logit f(x) = h(x) - log(nu) on labels 1 (model class) / 0 (marginal
class), which is solved on a standardized design by the kernel in
`_solver`.  Columns with zero variance are never penalized; the
unpenalized intercept absorbs them and is folded back into the explicit
constant statistic at the end when the map carries one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _solver
from .errors import ConfigError, NonConvergenceError
from .rng import Rng

# margin keeping the top of the path strictly above any floating-point
# drift of the gradient at the intercept-only optimum, so the all-zero
# solution is exact at lambda0
_LAMBDA0_MARGIN = 1e-9


@dataclass(frozen=True)
class Design:
    """Two-class training set of summary vectors."""

    theta_class: np.ndarray  # (n_theta, b)
    marginal_class: np.ndarray  # (n_m, b)

    def __post_init__(self):
        th = np.ascontiguousarray(np.atleast_2d(np.asarray(self.theta_class, dtype=float)))
        mg = np.ascontiguousarray(np.atleast_2d(np.asarray(self.marginal_class, dtype=float)))
        object.__setattr__(self, "theta_class", th)
        object.__setattr__(self, "marginal_class", mg)
        if th.shape[1] != mg.shape[1]:
            raise ConfigError("both classes must share the summary dimension")
        if th.shape[0] < 1 or mg.shape[0] < 1:
            raise ConfigError("both classes must be nonempty")
        if not (np.all(np.isfinite(th)) and np.all(np.isfinite(mg))):
            raise ConfigError("design entries must be finite")

    @property
    def n_theta(self) -> int:
        return self.theta_class.shape[0]

    @property
    def n_m(self) -> int:
        return self.marginal_class.shape[0]

    @property
    def b(self) -> int:
        return self.theta_class.shape[1]

    @property
    def nu(self) -> float:
        return self.n_m / self.n_theta

    def pooled(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked design and 1/0 labels (model class first)."""
        X = np.concatenate([self.theta_class, self.marginal_class], axis=0)
        y = np.concatenate([np.ones(self.n_theta), np.zeros(self.n_m)])
        return X, y


def _softplus(u: np.ndarray) -> np.ndarray:
    return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))


def logistic_loss(beta, intercept: float, design: Design) -> float:
    """Average logistic loss of the ratio model h = intercept + beta'psi.

    Computed overflow-safe as
    (1/N) [ sum_theta log(1 + nu e^{-h}) + sum_m log(1 + e^{h}/nu) ].
    """
    beta = np.asarray(beta, dtype=float)
    log_nu = np.log(design.nu)
    h_th = intercept + design.theta_class @ beta
    h_m = intercept + design.marginal_class @ beta
    total = _softplus(log_nu - h_th).sum() + _softplus(h_m - log_nu).sum()
    return float(total) / (design.n_theta + design.n_m)


def loss_gradient(beta, intercept: float, design: Design) -> tuple[np.ndarray, float]:
    """Gradient of `logistic_loss` in (beta, intercept)."""
    beta = np.asarray(beta, dtype=float)
    X, y = design.pooled()
    f = intercept + X @ beta - np.log(design.nu)
    p = _sigmoid(f)
    r = (p - y) / X.shape[0]
    return X.T @ r, float(r.sum())


def _sigmoid(f: np.ndarray) -> np.ndarray:
    out = np.empty_like(f)
    pos = f >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-f[pos]))
    ef = np.exp(f[~pos])
    out[~pos] = ef / (1.0 + ef)
    return out


@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray  # (b,)
    scale: np.ndarray  # (b,), 1.0 for constant columns
    penalized: np.ndarray  # (b,) bool, False for constant columns

    @classmethod
    def from_design(cls, X: np.ndarray) -> "Standardization":
        mean = X.mean(axis=0)
        sd = X.std(axis=0)
        span = np.maximum(np.abs(X).max(axis=0), 1.0)
        penalized = sd > 1e-12 * span
        out_mean = np.where(penalized, mean, 0.0)
        out_scale = np.where(penalized, np.where(sd > 0, sd, 1.0), 1.0)
        return cls(out_mean, out_scale, penalized)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


@dataclass(frozen=True)
class PathFit:
    """Coefficient path over a decreasing lambda grid (standardized scale)."""

    lambdas: np.ndarray  # (L,)
    betas: np.ndarray  # (L, b) on the standardized scale; 0 at unpenalized cols
    intercepts: np.ndarray  # (L,) classifier intercept (logit scale)
    standardization: Standardization
    sweeps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def beta_original(self, index: int) -> tuple[np.ndarray, float]:
        """Coefficients on the raw statistic scale and the classifier intercept."""
        st = self.standardization
        beta = self.betas[index] / st.scale
        intercept = float(self.intercepts[index] - (self.betas[index] * st.mean / st.scale).sum())
        return beta, intercept

    def predict_logits(self, X: np.ndarray) -> np.ndarray:
        """Classifier logits for raw rows, shape (n, L)."""
        Z = self.standardization.transform(np.atleast_2d(X))
        return Z @ self.betas.T + self.intercepts[None, :]


def lambda_max(design: Design) -> float:
    """Smallest penalty at which every penalized coefficient is zero.

    Max absolute loss gradient over standardized columns at the
    intercept-only optimum; 0.0 if no column varies.
    """
    X, y = design.pooled()
    st = Standardization.from_design(X)
    if not st.penalized.any():
        return 0.0
    Z = st.transform(X)[:, st.penalized]
    ybar = y.mean()
    g = Z.T @ (ybar - y) / y.shape[0]
    return float(np.abs(g).max())


def _lambda_grid(lambda0: float, n_lambda: int, lambda_ratio: float) -> np.ndarray:
    if lambda0 <= 0.0:
        return np.array([0.0])
    top = lambda0 * (1.0 + _LAMBDA0_MARGIN)
    return np.geomspace(top, lambda_ratio * top, n_lambda)


def fit_l1_path(
    design: Design,
    n_lambda: int = 100,
    lambda_ratio: float = 1e-4,
    *,
    lambdas: np.ndarray | None = None,
    tol: float = 1e-7,
    kkt_tol: float = 5e-6,
    max_sweeps: int = 100_000,
) -> PathFit:
    """Solve the penalized problem on a log-spaced grid from lambda0 down
    to lambda_ratio*lambda0, warm-starting along the way.

    Raises
    ------
    NonConvergenceError
        If the sweep budget runs out at some path point.
    """
    if lambdas is None:
        if n_lambda < 2:
            raise ConfigError("n_lambda must be >= 2")
        if not 0.0 < lambda_ratio < 1.0:
            raise ConfigError("lambda_ratio must lie in (0, 1)")
        lambdas = _lambda_grid(lambda_max(design), n_lambda, lambda_ratio)
    else:
        lambdas = np.asarray(lambdas, dtype=float)
        if np.any(np.diff(lambdas) > 0):
            raise ConfigError("lambdas must be nonincreasing")
    X, y = design.pooled()
    st = Standardization.from_design(X)
    L = lambdas.shape[0]
    b = design.b
    if not st.penalized.any():
        ybar = y.mean()
        c = float(np.log(ybar / (1.0 - ybar)))
        return PathFit(
            lambdas,
            np.zeros((L, b)),
            np.full(L, c),
            st,
            np.zeros(L, dtype=np.int64),
        )
    Zp = np.ascontiguousarray(st.transform(X)[:, st.penalized].T)
    betas_p, intercepts, sweeps, status = _solver.lasso_logit_path(
        Zp, y, lambdas, tol, kkt_tol, max_sweeps
    )
    bad = np.nonzero(status != _solver.STATUS_OK)[0]
    if bad.size:
        raise NonConvergenceError(int(bad[0]))
    betas = np.zeros((L, b))
    betas[:, st.penalized] = betas_p
    return PathFit(lambdas, betas, intercepts, st, sweeps)


def kkt_violations(path: PathFit, design: Design) -> np.ndarray:
    """Max KKT violation per path point (standardized scale, exact gradient)."""
    X, y = design.pooled()
    Z = path.standardization.transform(X)
    out = np.empty(path.lambdas.shape[0])
    for li, lam in enumerate(path.lambdas):
        f = Z @ path.betas[li] + path.intercepts[li]
        g = Z.T @ (_sigmoid(f) - y) / y.shape[0]
        beta = path.betas[li]
        pen = path.standardization.penalized
        viol = np.where(
            beta == 0.0, np.maximum(np.abs(g) - lam, 0.0), np.abs(g + lam * np.sign(beta))
        )
        out[li] = viol[pen].max() if pen.any() else 0.0
    return out


@dataclass(frozen=True)
class CvSelection:
    """Cross-validated prediction-risk curve and the selected penalty."""

    lambda_min: float
    lambda_min_index: int
    risk_curve: np.ndarray  # (L,) in [0, 1]
    fold_theta: np.ndarray  # (n_theta,) fold id per model-class row
    fold_marginal: np.ndarray  # (n_m,)


def cv_prediction_risk(
    design: Design, path: PathFit, folds: int = 10, rng: Rng | None = None
) -> CvSelection:
    """Held-out misclassification rate per lambda, class-stratified folds.

    A point ties at probability 0.5 counts as classified into the
    marginal class, so the null model has risk n_theta/N rather than 0.
    Ties in the risk curve resolve toward the largest lambda.
    """
    if folds < 2:
        raise ConfigError("folds must be >= 2")
    if design.n_theta < folds or design.n_m < folds:
        raise ConfigError("each class needs at least `folds` rows")
    if rng is None:
        raise ConfigError("cv_prediction_risk needs an rng for fold assignment")
    g = rng.generator()
    fold_theta = np.empty(design.n_theta, dtype=np.int64)
    fold_theta[g.permutation(design.n_theta)] = np.arange(design.n_theta) % folds
    fold_marginal = np.empty(design.n_m, dtype=np.int64)
    fold_marginal[g.permutation(design.n_m)] = np.arange(design.n_m) % folds

    L = path.lambdas.shape[0]
    risk = np.zeros(L)
    for f in range(folds):
        tr = Design(
            design.theta_class[fold_theta != f], design.marginal_class[fold_marginal != f]
        )
        sub = fit_l1_path(tr, lambdas=path.lambdas)
        logits_th = sub.predict_logits(design.theta_class[fold_theta == f])
        logits_m = sub.predict_logits(design.marginal_class[fold_marginal == f])
        err = (logits_th <= 0).sum(axis=0) + (logits_m > 0).sum(axis=0)
        risk += err / (logits_th.shape[0] + logits_m.shape[0])
    risk /= folds
    idx = int(np.argmin(risk))
    return CvSelection(float(path.lambdas[idx]), idx, risk, fold_theta, fold_marginal)


@dataclass(frozen=True)
class RatioFit:
    """Estimated log-ratio h(psi) = intercept + beta'psi on the raw scale."""

    beta: np.ndarray  # (b,)
    intercept: float  # 0.0 when folded into a constant statistic
    lambda_min: float
    n_nonzero: int
    cv_risk: float

    def log_ratio(self, psi: np.ndarray) -> np.ndarray | float:
        psi = np.asarray(psi, dtype=float)
        return self.intercept + psi @ self.beta


def fit_ratio(
    design: Design,
    rng: Rng,
    *,
    n_lambda: int = 100,
    lambda_ratio: float = 1e-4,
    folds: int = 10,
    fixed_lambda: float | None = None,
) -> RatioFit:
    """lambda0 -> L1 path -> CV risk -> coefficients at lambda_min.

    The returned coefficients live on the original statistic scale; the
    classifier intercept plus log(nu) is folded into the constant
    statistic's coefficient when the design has a constant column.
    `fixed_lambda` skips CV and evaluates the path at the given penalty.
    """
    path = fit_l1_path(design, n_lambda=n_lambda, lambda_ratio=lambda_ratio)
    if fixed_lambda is not None:
        idx = int(np.argmin(np.abs(path.lambdas - fixed_lambda)))
        lam, risk = float(path.lambdas[idx]), float("nan")
    else:
        cv = cv_prediction_risk(design, path, folds=folds, rng=rng)
        idx, lam, risk = cv.lambda_min_index, cv.lambda_min, float(cv.risk_curve[cv.lambda_min_index])
    beta, c = path.beta_original(idx)
    intercept_h = c + np.log(design.nu)
    beta = beta.copy()
    X, _ = design.pooled()
    const_cols = np.nonzero(~path.standardization.penalized)[0]
    intercept_out = intercept_h
    for j in const_cols:
        v = X[0, j]
        if v != 0.0:
            beta[j] = intercept_h / v
            intercept_out = 0.0
            break
    nnz = int(np.count_nonzero(path.betas[idx][path.standardization.penalized]))
    return RatioFit(beta, float(intercept_out), lam, nnz, risk)


def fit_record(ratio: RatioFit, path: PathFit, cv: CvSelection | None, rng: Rng) -> dict:
    """JSON-ready audit record of one fit."""
    rec = {
        "seed": rng.seed,
        "stream": rng.stream,
        "lambda_min": ratio.lambda_min,
        "beta": [float(v) for v in ratio.beta],
        "intercept": ratio.intercept,
        "n_nonzero": ratio.n_nonzero,
        "lambdas": [float(v) for v in path.lambdas],
    }
    if cv is not None:
        rec["risk_curve"] = [float(v) for v in cv.risk_curve]
        rec["fold_theta"] = [int(v) for v in cv.fold_theta]
        rec["fold_marginal"] = [int(v) for v in cv.fold_marginal]
    return rec
