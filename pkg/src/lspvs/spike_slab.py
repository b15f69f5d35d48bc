"""Collapsed Add-Delete-Swap sampler for the point-mass Spike-and-Slab model.

Model, on centered data::

    y | beta, sigma2 ~ N(X beta, sigma2 I)
    beta_j | sigma2, gamma_j ~ (1 - gamma_j) delta_0 + gamma_j N(0, tau sigma2)
    sigma2 ~ InvGamma(a_sigma, b_sigma)
    gamma_j ~ Bernoulli(theta_j(w, s, eta))

beta and sigma2 are integrated out, so the chain only moves over
(gamma, s, eta). Each iteration performs one Metropolis-Hastings ADS move
on gamma, an exact Gibbs draw of eta from its discrete conditional, and a
random-walk Metropolis update of logit(s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .core import RegressionData, as_gamma, as_weights, make_rng, validate_dimensions
from .errors import ConfigError, InvalidBudget, NumericalFailure
from .prior import LspConfig, relative_weights

ADD, DELETE, SWAP = 0, 1, 2


@dataclass(frozen=True)
class SsModelSpec:
    tau: float = 1.0
    a_sigma: float = 0.01
    b_sigma: float = 0.01
    lsp: LspConfig = field(default_factory=LspConfig)
    move_probs: tuple[float, float, float] = (0.4, 0.4, 0.2)
    s_step: float = 1.0

    def __post_init__(self):
        for name in ("tau", "a_sigma", "b_sigma", "s_step"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive", field=name)
        if len(self.move_probs) != 3 or min(self.move_probs) < 0 or sum(self.move_probs) <= 0:
            raise ConfigError("move_probs must be three nonnegative numbers", field="move_probs")


class MarginalLikelihood:
    """log p(y | gamma) with beta and sigma2 integrated out, memoized per model.

    With A = X_g'X_g + I/tau and R = y'y - y'X_g A^{-1} X_g'y,

        log p(y|g) = -n/2 log(2 pi) - k/2 log(tau) - 1/2 log|A|
                     + a log b - lgamma(a) + lgamma(a + n/2)
                     - (a + n/2) log(b + R/2).
    """

    def __init__(self, data: RegressionData, spec: SsModelSpec):
        X, y = data.X, data.y
        self.n = data.n
        self.tau = float(spec.tau)
        self.gram = np.ascontiguousarray(X.T @ X)
        self.xty = X.T @ y
        self.yty = float(y @ y)
        a, b = spec.a_sigma, spec.b_sigma
        self.shape = a + 0.5 * self.n
        self.b = float(b)
        self.const = float(
            -0.5 * self.n * math.log(2 * math.pi)
            + a * math.log(b) - gammaln(a) + gammaln(self.shape)
        )
        self._cache: dict[bytes, tuple[float, np.ndarray, np.ndarray]] = {}

    @property
    def args(self) -> tuple:
        return self.gram, self.xty, self.yty, self.tau, self.shape, self.b, self.const

    def evaluate(self, idx: np.ndarray) -> tuple[float, np.ndarray]:
        """Log marginal likelihood and E[beta_g | g, y] for active set ``idx``."""
        idx = np.asarray(idx, dtype=np.int64)
        value, beta = _kernels.ss_log_ml(self.gram, self.xty, self.yty, idx,
                                         self.tau, self.shape, self.b, self.const)
        if math.isnan(value):
            raise NumericalFailure("regularized Gram matrix is not positive definite")
        return float(value), beta

    def __call__(self, gamma: np.ndarray) -> float:
        return self.lookup(gamma)[0]

    def lookup(self, gamma: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        key = gamma.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            idx = np.flatnonzero(gamma)
            value, beta = self.evaluate(idx)
            hit = (value, idx, beta)
            self._cache[key] = hit
        return hit


def log_marginal_likelihood(data: RegressionData, gamma, spec: SsModelSpec | None = None) -> float:
    """Closed-form log p(y | gamma); ``data`` is assumed centered."""
    spec = spec or SsModelSpec()
    g = as_gamma(gamma)
    validate_dimensions(data, g)
    return MarginalLikelihood(data, spec).evaluate(np.flatnonzero(g))[0]


def conditional_beta_mean(data: RegressionData, gamma, tau: float = 1.0) -> np.ndarray:
    """(X_g'X_g + I/tau)^{-1} X_g'y embedded at zero outside the model."""
    g = as_gamma(gamma)
    validate_dimensions(data, g)
    out = np.zeros(data.p)
    out[g] = MarginalLikelihood(data, SsModelSpec(tau=tau)).evaluate(np.flatnonzero(g))[1]
    return out


@dataclass(frozen=True)
class ChainState:
    gamma: np.ndarray
    s: float
    eta_index: int
    eta: float
    log_ml: float
    log_theta: np.ndarray
    log1m_theta: np.ndarray

    @property
    def size(self) -> int:
        return int(self.gamma.sum())


@dataclass
class PosteriorSummary:
    mip: np.ndarray
    bma_beta: np.ndarray
    mpm_gamma: np.ndarray
    s_trace: np.ndarray
    eta_trace: np.ndarray
    n_samples: int
    burn_in: int
    acceptance_rate: dict
    model_counts: dict = field(default_factory=dict)

    @property
    def retained(self) -> int:
        return self.n_samples - self.burn_in

    def to_dict(self, traces: bool = False) -> dict:
        out = {
            "mip": self.mip.tolist(),
            "bma_beta": self.bma_beta.tolist(),
            "mpm": self.mpm_gamma.astype(int).tolist(),
            "n_samples": self.n_samples,
            "burn_in": self.burn_in,
            "acceptance_rate": self.acceptance_rate,
        }
        if traces:
            out["s_trace"] = self.s_trace.tolist()
            out["eta_trace"] = self.eta_trace.tolist()
        return out


class SpikeSlabSampler:
    """Holds the per-dataset precomputations shared by every update.

    The single-step methods and :meth:`run` call the same compiled updates,
    so stepping by hand with a generator reproduces ``run`` draw for draw.
    """

    def __init__(self, data: RegressionData, w, spec: SsModelSpec):
        w = as_weights(w)
        validate_dimensions(data, w)
        self.data = data
        self.w = w
        self.spec = spec
        self.p = data.p
        self.ml = MarginalLikelihood(data, spec)
        lsp = spec.lsp
        self.a_s, self.b_s = lsp.beta_params(self.p)
        self.etas = np.array(lsp.candidates())
        # Row k holds w**eta_k / mean(w**eta_k); theta = s * row.
        self.rel = np.ascontiguousarray(np.vstack([relative_weights(w, e) for e in self.etas]))
        self.log_rel = np.log(self.rel)
        self.rel_max = self.rel.max(axis=1)
        self.log_eta_prior = lsp.log_eta_prior_weights()
        mp = np.asarray(spec.move_probs, dtype=float)
        self._move_probs = mp / mp.sum()
        self.accepted = np.zeros(3, dtype=np.int64)
        self.proposed = np.zeros(3, dtype=np.int64)

    # -- helpers -----------------------------------------------------------

    def _theta_logs(self, s: float, k: int):
        return _kernels.theta_logs(s, self.rel[k], self.log_rel[k])

    def _move_distribution(self, size: int) -> np.ndarray:
        return _kernels.move_distribution(size, self.p, self._move_probs)

    def initial_gamma(self) -> np.ndarray:
        """Top-k features by weight, ties broken by index.

        Weights only inform the start when eta can leave zero, so a baseline
        run and an LSP run with the weights switched off start identically.
        """
        lsp = self.spec.lsp
        k = max(1, int(round(self.p * self.a_s / (self.a_s + self.b_s))))
        k = min(k, self.p)
        score = np.ones(self.p) if lsp.eta_always_zero else self.w
        order = np.argsort(-score, kind="stable")
        g = np.zeros(self.p, dtype=bool)
        g[order[:k]] = True
        return g

    def make_state(self, gamma, s: float | None = None, eta_index: int = 0) -> ChainState:
        g = as_gamma(gamma).copy()
        if g.size != self.p:
            raise ConfigError(f"gamma has length {g.size}, expected {self.p}", field="gamma")
        if s is None:
            s = self.spec.lsp.initial_s(self.p)
        if not 0.0 < s < 1.0:
            raise ConfigError("s must lie in (0, 1)", field="s")
        if s * self.rel_max[eta_index] >= 1:
            raise ConfigError("initial (s, eta) gives theta >= 1", field="s")
        lt, l1t = self._theta_logs(s, eta_index)
        return ChainState(g, float(s), eta_index, float(self.etas[eta_index]),
                          self.ml(g), lt, l1t)

    def initial_state(self) -> ChainState:
        return self.make_state(self.initial_gamma())

    # -- updates -----------------------------------------------------------

    def ads_step(self, state: ChainState, rng: np.random.Generator) -> ChainState:
        new = state.gamma.copy()
        move, ok, log_ml, _ = _kernels.ads_move(
            new, state.log_ml, state.log_theta, state.log1m_theta, self._move_probs,
            *self.ml.args, rng,
        )
        self.proposed[move] += 1
        if not ok:
            return state
        self.accepted[move] += 1
        return replace(state, gamma=new, log_ml=log_ml)

    def log_gamma_prior_by_eta(self, gamma: np.ndarray, s: float) -> np.ndarray:
        """log p(gamma | s, eta_k) for every candidate; -inf where theta >= 1."""
        return _kernels.log_prior_by_eta(as_gamma(gamma), s, self.rel, self.log_rel, self.rel_max)

    def eta_conditional(self, state: ChainState) -> np.ndarray:
        """Normalized P(eta = eta_k | gamma, s)."""
        return _kernels.eta_probs(state.gamma, state.s, self.log_eta_prior,
                                  self.rel, self.log_rel, self.rel_max)

    def update_eta(self, state: ChainState, rng: np.random.Generator) -> ChainState:
        if self.spec.lsp.fixed_eta is not None:
            return state
        k = int(_kernels.eta_draw(state.gamma, state.s, self.log_eta_prior,
                                  self.rel, self.log_rel, self.rel_max, rng))
        if k == state.eta_index:
            return state
        lt, l1t = self._theta_logs(state.s, k)
        return replace(state, eta_index=k, eta=float(self.etas[k]), log_theta=lt, log1m_theta=l1t)

    def update_s(self, state: ChainState, rng: np.random.Generator) -> ChainState:
        if self.spec.lsp.fixed_s is not None:
            return state
        k = state.eta_index
        s_new = float(_kernels.s_draw(state.s, state.gamma, self.rel[k], self.rel_max[k],
                                      self.a_s, self.b_s, self.spec.s_step, rng))
        if s_new == state.s:
            return state
        lt, l1t = self._theta_logs(s_new, k)
        return replace(state, s=s_new, log_theta=lt, log1m_theta=l1t)

    def step(self, state: ChainState, rng: np.random.Generator) -> ChainState:
        state = self.ads_step(state, rng)
        state = self.update_eta(state, rng)
        return self.update_s(state, rng)

    def run(self, n_samples: int, burn_in: int, rng: np.random.Generator,
            state: ChainState | None = None, record_models: bool = False) -> PosteriorSummary:
        """Run the chain and summarize the draws after burn-in.

        ``model_counts`` (visits per model, keyed by active indices) is only
        filled when ``record_models`` is set.
        """
        if n_samples <= burn_in or burn_in < 0:
            raise InvalidBudget(
                f"n_samples={n_samples} must exceed burn_in={burn_in} >= 0", field="n_samples",
            )
        state = state or self.initial_state()
        lsp = self.spec.lsp
        try:
            incl, bma, s_trace, k_trace, acc, prop, models, _, _ = _kernels.ads_chain(
                state.gamma.copy(), state.s, state.eta_index, n_samples, burn_in,
                self._move_probs, *self.ml.args,
                self.rel, self.log_rel, self.rel_max, self.log_eta_prior,
                lsp.fixed_eta is not None, lsp.fixed_s is not None,
                self.a_s, self.b_s, self.spec.s_step, record_models, rng,
            )
        except FloatingPointError as exc:
            raise NumericalFailure(str(exc)) from None
        self.accepted += acc
        self.proposed += prop
        kept = n_samples - burn_in
        mip = incl / kept
        model_counts = {}
        if record_models:
            uniq, counts = np.unique(models, axis=0, return_counts=True)
            model_counts = {tuple(int(i) for i in np.flatnonzero(u)): int(c)
                            for u, c in zip(uniq, counts)}
        rate = {
            name: (float(acc[m] / prop[m]) if prop[m] else None)
            for m, name in ((ADD, "add"), (DELETE, "delete"), (SWAP, "swap"))
        }
        return PosteriorSummary(
            mip=mip, bma_beta=bma / kept, mpm_gamma=mip > 0.5,
            s_trace=s_trace, eta_trace=self.etas[k_trace],
            n_samples=n_samples, burn_in=burn_in,
            acceptance_rate=rate, model_counts=model_counts,
        )


def ads_step(state: ChainState, data: RegressionData, w, spec: SsModelSpec, rng) -> ChainState:
    return SpikeSlabSampler(data, w, spec).ads_step(state, rng)


def update_eta(state: ChainState, data: RegressionData, w, spec: SsModelSpec, rng) -> ChainState:
    return SpikeSlabSampler(data, w, spec).update_eta(state, rng)


def update_s(state: ChainState, data: RegressionData, w, spec: SsModelSpec, rng) -> ChainState:
    return SpikeSlabSampler(data, w, spec).update_s(state, rng)


def run_chain(data: RegressionData, w, spec: SsModelSpec | None = None,
              n_samples: int = 5000, burn_in: int = 1000, seed=0,
              record_models: bool = False) -> PosteriorSummary:
    """Sample the posterior and summarize it.

    ``w=None`` runs the weight-free baseline (uniform theta_j = s).
    ``data`` should already be centered.
    """
    spec = spec or SsModelSpec()
    if w is None:
        w = np.ones(data.p)
        if not spec.lsp.eta_always_zero:
            spec = replace(spec, lsp=replace(spec.lsp, pi0=1.0, fixed_eta=None))
    sampler = SpikeSlabSampler(data, w, spec)
    return sampler.run(n_samples, burn_in, make_rng(seed), record_models=record_models)
