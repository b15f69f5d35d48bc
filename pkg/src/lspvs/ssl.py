"""MAP estimation for the Spike-and-Slab Lasso with weight-informed inclusion probabilities.

The prior on each coefficient is the two-Laplace mixture

    theta_j * (lambda1/2) exp(-lambda1 |b|) + (1 - theta_j) * (lambda0/2) exp(-lambda0 |b|).

The MAP path runs over an increasing grid of spike penalties lambda0 with
warm starts. At each lambda0 every admissible eta is tried from the same
warm start and the one with the highest log joint posterior is kept. The
final lambda0 minimizes BIC.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .core import RegressionData, as_weights, validate_dimensions
from .errors import ConfigError
from .prior import LspConfig, log_beta_density, log_hyperprior_eta, relative_weights


class NonConvergenceWarning(RuntimeWarning):
    pass


BIC_FORMS = ("known_variance", "profile")


@dataclass(frozen=True)
class SslSpec:
    lambda1: float = 1.0
    lambda0_grid: tuple[float, ...] | None = None
    grid_size: int = 20
    lsp: LspConfig = field(default_factory=LspConfig)
    s_mode: str = "update"
    sigma2: float = 1.0
    max_iterations: int = 1000
    tol: float = 1e-8
    bic_form: str = "known_variance"

    def __post_init__(self):
        if self.lambda1 <= 0:
            raise ConfigError("lambda1 must be positive", field="lambda1")
        if self.s_mode not in ("fixed", "update"):
            raise ConfigError("s_mode must be 'fixed' or 'update'", field="s_mode")
        if self.sigma2 <= 0:
            raise ConfigError("sigma2 must be positive", field="sigma2")
        if self.grid_size < 1:
            raise ConfigError("grid_size must be at least 1", field="grid_size")
        if self.bic_form not in BIC_FORMS:
            raise ConfigError(f"bic_form must be one of {BIC_FORMS}", field="bic_form")
        if self.lambda0_grid is not None:
            grid = tuple(float(v) for v in self.lambda0_grid)
            object.__setattr__(self, "lambda0_grid", grid)
            self._check_grid(grid)

    def _check_grid(self, grid):
        if not grid:
            raise ConfigError("lambda0_grid is empty", field="lambda0_grid")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("lambda0_grid must be strictly increasing", field="lambda0_grid")
        if grid[0] < self.lambda1:
            raise ConfigError("lambda0_grid must start at or above lambda1", field="lambda0_grid")

    def grid(self, n: int) -> np.ndarray:
        """The explicit grid, or ``grid_size`` equally spaced values on [lambda1, n]."""
        if self.lambda0_grid is not None:
            return np.asarray(self.lambda0_grid)
        hi = max(float(n), self.lambda1)
        if self.grid_size == 1:
            return np.array([self.lambda1])
        return np.linspace(self.lambda1, hi, self.grid_size)


def conditional_inclusion_prob(beta_j: float, theta_j: float, lambda0: float, lambda1: float) -> float:
    """Posterior weight of the slab component at coefficient value ``beta_j``."""
    ab = abs(beta_j)
    log_slab = math.log(theta_j * lambda1) - lambda1 * ab
    log_spike = math.log((1 - theta_j) * lambda0) - lambda0 * ab
    return 1.0 / (1.0 + math.exp(min(log_spike - log_slab, 700.0)))


def log_mixture_prior(beta, theta, lambda0: float, lambda1: float) -> float:
    ab = np.abs(beta)
    return float(np.logaddexp(
        np.log(theta * lambda1 / 2) - lambda1 * ab,
        np.log((1 - theta) * lambda0 / 2) - lambda0 * ab,
    ).sum())


def penalized_objective(data: RegressionData, beta, theta, lambda0, lambda1, sigma2=1.0) -> float:
    """Negative log posterior of beta up to a constant (the quantity descent minimizes)."""
    r = data.y - data.X @ beta
    return 0.5 * float(r @ r) / sigma2 - log_mixture_prior(beta, theta, lambda0, lambda1)


def bic(data: RegressionData, beta, sigma2: float = 1.0, form: str = "known_variance") -> float:
    """BIC with df = number of nonzero coefficients.

    ``known_variance`` scores RSS / sigma2, matching the fixed noise
    variance of the MAP objective. ``profile`` plugs in the maximum
    likelihood variance, n log(RSS / n), which rewards near-interpolating
    fits once the support approaches n.
    """
    r = data.y - data.X @ beta
    rss = max(float(r @ r), np.finfo(float).tiny)
    df = int(np.count_nonzero(beta))
    if form == "known_variance":
        return rss / sigma2 + df * math.log(data.n)
    if form == "profile":
        return data.n * math.log(rss / data.n) + df * math.log(data.n)
    raise ConfigError(f"bic form must be one of {BIC_FORMS}", field="bic_form")


class _Problem:
    """Column-major copies and weight powers shared across a path."""

    def __init__(self, data: RegressionData, w, spec: SslSpec):
        w = as_weights(w)
        validate_dimensions(data, w)
        self.data = data
        self.w = w
        self.spec = spec
        self.X = np.asfortranarray(data.X)
        self.y = np.ascontiguousarray(data.y)
        self.a_s, self.b_s = spec.lsp.beta_params(data.p)
        self._rel: dict[float, np.ndarray] = {}

    def theta(self, s: float, eta: float) -> np.ndarray | None:
        rel = self._rel.get(eta)
        if rel is None:
            rel = self._rel[eta] = relative_weights(self.w, eta)
        th = s * rel
        return th if th.max() < 1.0 else None

    def descend(self, theta, lambda0, warm_start, max_iterations=None):
        beta = np.array(warm_start, dtype=float, copy=True)
        spec = self.spec
        _, ok = _kernels.ssl_cd(
            self.X, self.y, beta, theta, float(lambda0), spec.lambda1, spec.sigma2,
            spec.tol, spec.max_iterations if max_iterations is None else max_iterations,
        )
        return beta, ok

    def log_joint(self, beta, theta, lambda0, s, eta) -> float:
        spec = self.spec
        n = self.data.n
        r = self.y - self.X @ beta
        loglik = -0.5 * n * math.log(2 * math.pi * spec.sigma2) - 0.5 * float(r @ r) / spec.sigma2
        return (
            loglik + log_mixture_prior(beta, theta, lambda0, spec.lambda1)
            + log_beta_density(s, self.a_s, self.b_s)
            + log_hyperprior_eta(eta, spec.lsp)
        )


def coordinate_descent(data: RegressionData, w, spec: SslSpec, lambda0: float, eta: float,
                       s: float, warm_start=None, debug: bool = False) -> np.ndarray:
    """MAP coefficients at fixed (lambda0, eta, s), starting from ``warm_start``.

    With ``debug=True`` the penalized objective is checked after every full
    cycle and an AssertionError is raised if it ever increases.
    """
    prob = _Problem(data, w, spec)
    theta = prob.theta(s, eta)
    if theta is None:
        raise ConfigError(f"eta={eta} with s={s} gives theta >= 1", field="eta")
    beta = np.zeros(data.p) if warm_start is None else np.asarray(warm_start, dtype=float)
    if not debug:
        beta, ok = prob.descend(theta, lambda0, beta)
    else:
        obj = penalized_objective(data, beta, theta, lambda0, spec.lambda1, spec.sigma2)
        ok = False
        for _ in range(spec.max_iterations):
            new, ok = prob.descend(theta, lambda0, beta, max_iterations=1)
            new_obj = penalized_objective(data, new, theta, lambda0, spec.lambda1, spec.sigma2)
            assert new_obj <= obj + 1e-9 * max(1.0, abs(obj)), (obj, new_obj)
            beta, obj = new, new_obj
            if ok:
                break
    if not ok:
        warnings.warn(f"coordinate descent did not converge at lambda0={lambda0}",
                      NonConvergenceWarning, stacklevel=2)
    return beta


@dataclass
class SslRecord:
    lambda0: float
    beta: np.ndarray
    eta: float
    s: float
    bic: float
    log_posterior: float
    converged: bool

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta)

    def to_dict(self) -> dict:
        return {
            "lambda0": self.lambda0, "eta": self.eta, "s": self.s, "bic": self.bic,
            "log_posterior": self.log_posterior, "converged": self.converged,
            "support": self.support.tolist(), "beta": self.beta.tolist(),
        }


@dataclass
class SslPath:
    records: list[SslRecord]
    chosen: int

    @property
    def beta(self) -> np.ndarray:
        return self.records[self.chosen].beta

    @property
    def final(self) -> SslRecord:
        return self.records[self.chosen]

    def to_dict(self) -> dict:
        return {"chosen": self.chosen, "path": [r.to_dict() for r in self.records]}


def _select(prob: _Problem, lambda0: float, candidates, beta, s):
    best = None
    for eta in candidates:
        if log_hyperprior_eta(eta, prob.spec.lsp) == -math.inf:
            continue
        theta = prob.theta(s, eta)
        if theta is None:
            continue
        b, ok = prob.descend(theta, lambda0, beta)
        lp = prob.log_joint(b, theta, lambda0, s, eta)
        # ascending candidates + strict improvement: ties go to the smaller eta
        if best is None or lp > best[2]:
            best = (eta, b, lp, ok)
    if best is None:
        raise ConfigError(f"no admissible eta at s={s}", field="lsp.eta_grid")
    return best


def select_eta_for_lambda0(data: RegressionData, w, spec: SslSpec, lambda0: float,
                           candidates=None, beta=None, s: float | None = None) -> float:
    """The eta maximizing log p(beta, s, eta | y) after descending from ``beta``."""
    prob = _Problem(data, w, spec)
    if candidates is None:
        candidates = spec.lsp.candidates()
    if s is None:
        s = spec.lsp.initial_s(data.p)
    beta = np.zeros(data.p) if beta is None else beta
    return _select(prob, lambda0, sorted(candidates), beta, s)[0]


def run_path(data: RegressionData, w=None, spec: SslSpec | None = None, seed=None) -> SslPath:
    """Sweep lambda0 upward with warm starts; pick the final lambda0 by BIC.

    ``w=None`` runs the weight-free baseline. The procedure is deterministic;
    ``seed`` is accepted for interface symmetry with the samplers.
    """
    spec = spec or SslSpec()
    if w is None:
        w = np.ones(data.p)
        if not spec.lsp.eta_always_zero:
            spec = replace(spec, lsp=replace(spec.lsp, pi0=1.0, fixed_eta=None))
    prob = _Problem(data, w, spec)
    candidates = sorted(spec.lsp.candidates())
    s = spec.lsp.initial_s(data.p)
    # mode of the s conditional truncated to where some admissible eta keeps theta < 1
    s_cap = (1.0 - 1e-9) / min(relative_weights(prob.w, e).max() for e in candidates
                               if log_hyperprior_eta(e, spec.lsp) > -math.inf)
    if spec.lsp.fixed_s is None:
        s = min(s, s_cap)
    beta = np.zeros(data.p)
    records = []
    for lambda0 in spec.grid(data.n):
        eta, beta, lp, ok = _select(prob, float(lambda0), candidates, beta, s)
        if not ok:
            warnings.warn(f"coordinate descent did not converge at lambda0={lambda0}",
                          NonConvergenceWarning, stacklevel=2)
        records.append(SslRecord(float(lambda0), beta, float(eta), s,
                                 bic(data, beta, spec.sigma2, spec.bic_form), lp, ok))
        if spec.s_mode == "update" and spec.lsp.fixed_s is None:
            s = (prob.a_s + np.count_nonzero(beta)) / (prob.a_s + prob.b_s + data.p)
            s = min(s, s_cap)
    chosen = int(np.argmin([r.bic for r in records]))
    return SslPath(records, chosen)
