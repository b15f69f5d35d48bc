"""Weight-informed prior inclusion probabilities and their hyperpriors.

Feature ``j`` enters the model with probability

    theta_j = s * w_j**eta / mean_k(w_k**eta),

so the average inclusion probability is the global sparsity ``s`` and
``eta`` sets how sharply weight differences become probability
differences. ``eta = 0`` gives the uniform prior theta_j = s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

from .core import as_gamma, as_weights
from .errors import ConfigError, DimensionMismatch, EtaNotOnGrid, ThetaOverflow

UNBOUNDED = math.inf


def relative_weights(w, eta: float) -> np.ndarray:
    """``w**eta / mean(w**eta)``, computed in log space."""
    a = eta * np.log(w)
    a -= a.max()
    e = np.exp(a)
    return e / e.mean()


def compute_theta(w, s: float, eta: float) -> np.ndarray:
    w = as_weights(w)
    if not 0.0 < s < 1.0:
        raise ConfigError(f"s must lie in (0, 1), got {s}", field="s")
    if eta < 0:
        raise ConfigError(f"eta must be nonnegative, got {eta}", field="eta")
    theta = s * relative_weights(w, eta)
    if theta.max() >= 1.0:
        raise ThetaOverflow(
            f"eta={eta} gives max theta {theta.max():.6g} >= 1 at s={s}",
            field="eta", eta=eta, s=s,
        )
    return theta


def _max_theta(w, s, eta):
    return s * relative_weights(w, eta).max()


def loose_eta_bound(w, s: float) -> float:
    """Closed-form lower bound on the valid range of eta (needs s*p > 1)."""
    w = as_weights(w)
    p = w.size
    return math.log((p - 1) / (s * p - 1)) / math.log(w.max() / w.min())


def eta_max(w, s: float, tolerance: float = 1e-10) -> float:
    """Largest eta keeping every theta_j below one, or ``inf`` if none binds.

    max_j theta_j rises monotonically in eta from s toward s*p/m, where m is
    the number of features sharing the largest weight; the bound exists only
    when that limit reaches 1. The returned value is the lower end of the
    final bisection bracket, so it is itself valid.
    """
    w = as_weights(w)
    if not 0.0 < s < 1.0:
        raise ConfigError(f"s must lie in (0, 1), got {s}", field="s")
    p = w.size
    if s * p < 1 or w.max() == w.min():
        return UNBOUNDED
    m = int(np.sum(w == w.max()))
    if s * p / m <= 1:
        return UNBOUNDED
    lo, hi = 0.0, 1.0
    while _max_theta(w, s, hi) < 1.0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tolerance * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if _max_theta(w, s, mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return lo


def log_prior_gamma(gamma, theta) -> float:
    """Log probability of an inclusion vector under independent Bernoulli(theta_j)."""
    g = as_gamma(gamma)
    theta = np.asarray(theta, dtype=float)
    if g.shape != theta.shape:
        raise DimensionMismatch(f"gamma has length {g.size}, theta {theta.size}", field="theta")
    return float(np.log(theta[g]).sum() + np.log1p(-theta[~g]).sum())


@dataclass(frozen=True)
class LspConfig:
    """Hyperpriors: s ~ Beta(a_s, b_s); eta ~ pi0 * delta_0 + (1 - pi0) * Uniform(eta_grid).

    ``b_s=None`` stands for the number of features p. ``fixed_s`` /
    ``fixed_eta`` pin the corresponding parameter instead.
    """

    a_s: float = 1.0
    b_s: float | None = None
    pi0: float = 0.5
    eta_grid: tuple[float, ...] = tuple(float(k) for k in range(1, 11))
    fixed_s: float | None = None
    fixed_eta: float | None = None

    def __post_init__(self):
        grid = tuple(float(e) for e in self.eta_grid)
        object.__setattr__(self, "eta_grid", grid)
        if self.a_s <= 0 or (self.b_s is not None and self.b_s <= 0):
            raise ConfigError("a_s and b_s must be positive", field="a_s")
        if not 0.0 <= self.pi0 <= 1.0:
            raise ConfigError("pi0 must lie in [0, 1]", field="pi0")
        if not grid:
            raise ConfigError("eta_grid is empty", field="eta_grid")
        if grid[0] <= 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("eta_grid must be strictly positive and increasing", field="eta_grid")
        if self.fixed_s is not None and not 0.0 < self.fixed_s < 1.0:
            raise ConfigError("fixed_s must lie in (0, 1)", field="fixed_s")
        if self.fixed_eta is not None and self.fixed_eta < 0:
            raise ConfigError("fixed_eta must be nonnegative", field="fixed_eta")

    def beta_params(self, p: int) -> tuple[float, float]:
        return float(self.a_s), float(p if self.b_s is None else self.b_s)

    def prior_mean_s(self, p: int) -> float:
        a, b = self.beta_params(p)
        return a / (a + b)

    def initial_s(self, p: int) -> float:
        return self.fixed_s if self.fixed_s is not None else self.prior_mean_s(p)

    @property
    def eta_always_zero(self) -> bool:
        """True when the configuration leaves the weights no influence."""
        if self.fixed_eta is not None:
            return self.fixed_eta == 0
        return self.pi0 >= 1.0

    def candidates(self) -> tuple[float, ...]:
        """Values eta can take: 0 followed by the grid, or the pinned value."""
        if self.fixed_eta is not None:
            return (float(self.fixed_eta),)
        return (0.0,) + self.eta_grid

    def log_eta_prior_weights(self) -> np.ndarray:
        """Log prior mass of each entry of :meth:`candidates`."""
        if self.fixed_eta is not None:
            return np.zeros(1)
        with np.errstate(divide="ignore"):
            return np.concatenate((
                [math.log(self.pi0) if self.pi0 > 0 else -math.inf],
                np.full(len(self.eta_grid), math.log((1 - self.pi0) / len(self.eta_grid))
                        if self.pi0 < 1 else -math.inf),
            ))

    def to_dict(self) -> dict:
        return {
            "a_s": self.a_s, "b_s": self.b_s, "pi0": self.pi0,
            "eta_grid": list(self.eta_grid),
            "fixed_s": self.fixed_s, "fixed_eta": self.fixed_eta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> LspConfig:
        known = {"a_s", "b_s", "pi0", "eta_grid", "fixed_s", "fixed_eta"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown LSP fields {sorted(extra)}", field=f"lsp.{sorted(extra)[0]}")
        return cls(**d)


def default_config(w, a_s: float = 1.0, b_s: float | None = None, pi0: float = 0.5) -> LspConfig:
    """Beta(1, p) on s and ten equally spaced eta values on (0, eta_max].

    eta_max is evaluated at the prior mean of s. When it is unbounded the
    grid falls back to 1..10.
    """
    w = as_weights(w)
    b_s = float(w.size) if b_s is None else b_s
    bound = eta_max(w, a_s / (a_s + b_s))
    if math.isinf(bound):
        grid = tuple(float(k) for k in range(1, 11))
    else:
        grid = tuple(bound * k / 10 for k in range(1, 11))
    return LspConfig(a_s=a_s, b_s=b_s, pi0=pi0, eta_grid=grid)


def log_hyperprior_eta(eta: float, config: LspConfig) -> float:
    if config.fixed_eta is not None:
        return 0.0 if eta == config.fixed_eta else -math.inf
    if eta == 0:
        return math.log(config.pi0) if config.pi0 > 0 else -math.inf
    if not any(math.isclose(eta, e, rel_tol=1e-12, abs_tol=0.0) for e in config.eta_grid):
        raise EtaNotOnGrid(f"eta={eta} is neither 0 nor on the grid", field="eta", eta=eta)
    if config.pi0 >= 1:
        return -math.inf
    return math.log((1 - config.pi0) / len(config.eta_grid))


def log_beta_density(s: float, a: float, b: float) -> float:
    return (a - 1) * math.log(s) + (b - 1) * math.log1p(-s) - float(betaln(a, b))
