"""Weighted Lasso with inverse-importance penalty factors (LLM-Lasso) and plain Lasso.

    minimize  0.5 * sum_i (y_i - b0 - x_i'b)^2 + lambda * sum_j w_j**(-eta) |b_j|

The intercept is never penalized; fits run on centered data and the
intercept is recovered from the centering record. Tuning follows a
sequential two-stage cross-validation: eta first, then lambda.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .core import RegressionData, as_weights, make_rng, standardize, validate_dimensions
from .errors import ConfigError, InsufficientData
from .ssl import NonConvergenceWarning


def penalty_factors(w, eta: float) -> np.ndarray:
    return np.exp(-eta * np.log(as_weights(w)))


def _fit(X, y, pen, tol, max_iter, warm_start=None):
    beta = np.zeros(X.shape[1]) if warm_start is None else np.array(warm_start, dtype=float)
    _, ok = _kernels.weighted_lasso_cd(np.asfortranarray(X), np.ascontiguousarray(y), beta,
                                       np.ascontiguousarray(pen, dtype=float), tol, max_iter)
    if not ok:
        warnings.warn("weighted lasso did not converge", NonConvergenceWarning, stacklevel=3)
    return beta


def weighted_lasso_fit(data: RegressionData, w, eta: float, lam: float,
                       tol: float = 1e-24, max_iter: int = 1_000_000) -> np.ndarray:
    """Coefficients on centered ``data`` with per-feature thresholds lam * w_j**(-eta)."""
    if eta < 0:
        raise ConfigError("eta must be nonnegative", field="eta")
    if lam <= 0:
        raise ConfigError("lambda must be positive", field="lambda")
    validate_dimensions(data, w)
    return _fit(data.X, data.y, lam * penalty_factors(w, eta), tol, max_iter)


def lasso_fit(data: RegressionData, lam: float, tol: float = 1e-24, max_iter: int = 1_000_000) -> np.ndarray:
    return weighted_lasso_fit(data, np.ones(data.p), 0.0, lam, tol, max_iter)


def kkt_violation(data: RegressionData, beta, penalty) -> float:
    """Largest violation of the Lasso optimality conditions.

    Active j: X_j'(y - Xb) = penalty_j sign(b_j); inactive j: |X_j'(y - Xb)| <= penalty_j.
    """
    grad = data.X.T @ (data.y - data.X @ beta)
    penalty = np.asarray(penalty, dtype=float)
    active = beta != 0
    v_active = np.abs(grad[active] - penalty[active] * np.sign(beta[active]))
    v_inactive = np.maximum(np.abs(grad[~active]) - penalty[~active], 0.0)
    return float(max(v_active.max(initial=0.0), v_inactive.max(initial=0.0)))


@dataclass(frozen=True)
class LassoCvSpec:
    """Grids for the two tuning stages.

    ``log_lambda_grid`` is on the per-observation scale, i.e. the penalty
    actually applied to the unnormalized objective is n_train * exp(value).
    """

    eta_grid: tuple[float, ...] = tuple(float(v) for v in np.linspace(0, 10, 11))
    log_lambda_grid: tuple[float, ...] = tuple(float(v) for v in np.linspace(-2.27, 2.34, 100))
    folds: int = 10
    tol: float = 1e-7
    max_iter: int = 10_000
    saturation: float = 1e-3

    def __post_init__(self):
        if not self.eta_grid or min(self.eta_grid) < 0:
            raise ConfigError("eta_grid must be nonempty and nonnegative", field="eta_grid")
        if not self.log_lambda_grid:
            raise ConfigError("log_lambda_grid is empty", field="log_lambda_grid")
        if self.folds < 2:
            raise ConfigError("folds must be at least 2", field="folds")

    def lambdas(self, n: int) -> np.ndarray:
        """Penalties for a training set of size ``n``, largest first."""
        return n * np.exp(np.sort(np.asarray(self.log_lambda_grid))[::-1])


@dataclass
class LassoCvResult:
    eta: float
    lam: float
    beta: np.ndarray
    intercept: float
    log_lambda: float
    cv_eta: dict = field(default_factory=dict)
    cv_lambda: np.ndarray | None = None

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta)

    def to_dict(self) -> dict:
        return {
            "eta": self.eta, "lambda": self.lam, "log_lambda": self.log_lambda,
            "intercept": self.intercept, "coefficients": self.beta.tolist(),
            "cv_error_by_eta": {str(k): v for k, v in self.cv_eta.items()},
            "cv_error_by_lambda": None if self.cv_lambda is None else self.cv_lambda.tolist(),
        }


def fold_ids(n: int, folds: int, rng: np.random.Generator) -> np.ndarray:
    ids = np.empty(n, dtype=np.int64)
    ids[rng.permutation(n)] = np.arange(n) % folds
    return ids


def _check_cv(n: int, folds: int):
    if folds > n:
        raise InsufficientData(f"{folds} folds need at least {folds} rows, have {n}", field="folds")
    # every training split must keep at least two rows for centering
    if n - math.ceil(n / folds) < 2:
        raise InsufficientData(f"n={n} too small for {folds}-fold CV", field="folds")


def cv_curve(data: RegressionData, factors: np.ndarray, spec: LassoCvSpec, ids: np.ndarray) -> np.ndarray:
    """Mean held-out MSE across folds, one entry per lambda (largest lambda first)."""
    folds = int(ids.max()) + 1
    err = np.zeros(len(spec.log_lambda_grid))
    for f in range(folds):
        test = ids == f
        train, centering = standardize(data.subset(~test))
        lambdas = spec.lambdas(train.n)
        betas, ok = _kernels.weighted_lasso_path(
            np.asfortranarray(train.X), np.ascontiguousarray(train.y),
            factors, lambdas, spec.tol, spec.max_iter, spec.saturation,
        )
        if not ok:
            warnings.warn("lasso path did not fully converge", NonConvergenceWarning, stacklevel=2)
        Xt = data.X[test] - centering.x_mean
        pred = centering.y_mean + Xt @ betas.T
        err += ((data.y[test][:, None] - pred) ** 2).mean(axis=0)
    return err / folds


def two_stage_cv(data: RegressionData, w, spec: LassoCvSpec | None = None, seed=0) -> LassoCvResult:
    """Pick eta, then lambda, by cross-validation, and refit on all rows.

    Stage one scores each eta by its best CV error over the lambda grid.
    Stage two fixes that eta and reselects lambda on an independent fold
    split. Ties prefer the smaller eta and the larger lambda.
    """
    spec = spec or LassoCvSpec()
    w = as_weights(w)
    validate_dimensions(data, w)
    folds = min(spec.folds, data.n)
    _check_cv(data.n, folds)
    lam_desc = np.sort(np.asarray(spec.log_lambda_grid))[::-1]

    cv_eta = {}
    if len(spec.eta_grid) == 1:
        eta_hat = float(spec.eta_grid[0])
    else:
        ids = fold_ids(data.n, folds, make_rng(seed, 1))
        best = None
        for eta in sorted(spec.eta_grid):
            score = float(cv_curve(data, penalty_factors(w, eta), spec, ids).min())
            cv_eta[float(eta)] = score
            if best is None or score < best[1]:
                best = (float(eta), score)
        eta_hat = best[0]

    ids = fold_ids(data.n, folds, make_rng(seed, 2))
    factors = penalty_factors(w, eta_hat)
    curve = cv_curve(data, factors, spec, ids)
    k = int(np.argmin(curve))  # first minimum = largest lambda among ties
    log_lam = float(lam_desc[k])

    centered, centering = standardize(data)
    lam = data.n * math.exp(log_lam)
    # the reported fit is solved to full precision; spec.tol only governs the CV path
    beta = _fit(centered.X, centered.y, lam * factors, 1e-24, 1_000_000)
    return LassoCvResult(
        eta=eta_hat, lam=lam, beta=beta, intercept=centering.intercept(beta),
        log_lambda=log_lam, cv_eta=cv_eta, cv_lambda=curve[::-1].copy(),
    )


def lasso_cv(data: RegressionData, spec: LassoCvSpec | None = None, seed=0) -> LassoCvResult:
    """Plain Lasso: the eta = 0 case of :func:`two_stage_cv`."""
    spec = spec or LassoCvSpec()
    spec = replace(spec, eta_grid=(0.0,))
    return two_stage_cv(data, np.ones(data.p), spec, seed)


def selection_frequency(fits) -> np.ndarray:
    """Per-feature share of fits with a nonzero coefficient."""
    fits = np.asarray([np.asarray(f, dtype=float) for f in fits])
    if fits.ndim != 2:
        raise ConfigError("fits must be equal-length vectors", field="fits")
    return (fits != 0).mean(axis=0)
