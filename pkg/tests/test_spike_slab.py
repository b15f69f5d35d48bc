import math

import numpy as np
import pytest
from conftest import make_data
from oracles import exact_posterior, oracle_fixtures, p4_fixture, tv
from scipy import stats
from scipy.special import gammaln

from lspvs import _kernels
from lspvs.core import make_rng
from lspvs.errors import ConfigError, InvalidBudget
from lspvs.prior import LspConfig, relative_weights
from lspvs.spike_slab import (
    MarginalLikelihood,
    SpikeSlabSampler,
    SsModelSpec,
    conditional_beta_mean,
    log_marginal_likelihood,
    run_chain,
)

# log p(y | gamma) from oracles.quadrature_log_ml on oracle_fixtures()
QUADRATURE_ORACLE = [
    # (fixture index, gamma, log p(y|gamma))
    (0, (0, 0), -15.478381214457182),
    (1, (1, 0), -13.850734255629554),
    (2, (0, 1), -17.422114503101273),
    (3, (1, 1), -12.105398674724096),
]


class TestMarginalLikelihood:
    @pytest.mark.parametrize("i", range(4))
    def test_quadrature_oracle(self, i):
        _, g, value = QUADRATURE_ORACLE[i]
        data = oracle_fixtures()[i]
        assert log_marginal_likelihood(data, np.array(g, dtype=bool)) == pytest.approx(value, rel=1e-12)

    def test_empty_model_closed_form(self):
        data = make_data(12, 3, seed=4)
        a = b = 0.01
        n, yty = data.n, float(data.y @ data.y)
        ref = (-n / 2 * math.log(2 * math.pi) + a * math.log(b) - gammaln(a) + gammaln(a + n / 2)
               - (a + n / 2) * math.log(b + yty / 2))
        assert log_marginal_likelihood(data, [0, 0, 0]) == pytest.approx(ref, rel=1e-14)

    def test_b_sigma_terms(self):
        data = make_data(12, 3, beta=[1, 0, 0], seed=4)
        g = np.array([1, 0, 1], dtype=bool)
        l1 = log_marginal_likelihood(data, g, SsModelSpec(b_sigma=0.01))
        l2 = log_marginal_likelihood(data, g, SsModelSpec(b_sigma=0.02))
        Xg = data.X[:, g]
        A = Xg.T @ Xg + np.eye(2)
        R = float(data.y @ data.y - data.y @ Xg @ np.linalg.solve(A, Xg.T @ data.y))
        shape = 0.01 + data.n / 2
        expected = 0.01 * math.log(2) - shape * (math.log(0.02 + R / 2) - math.log(0.01 + R / 2))
        assert l2 - l1 == pytest.approx(expected, rel=1e-10)

    def test_conditional_mean(self):
        data = make_data(15, 3, beta=[1, -1, 0], seed=2)
        g = np.array([1, 1, 0], dtype=bool)
        Xg = data.X[:, g]
        ref = np.linalg.solve(Xg.T @ Xg + np.eye(2) / 2.0, Xg.T @ data.y)
        np.testing.assert_allclose(conditional_beta_mean(data, g, tau=2.0)[g], ref, rtol=1e-12)

    def test_cache(self):
        data = make_data(15, 3, seed=2)
        ml = MarginalLikelihood(data, SsModelSpec())
        g = np.array([1, 0, 1], dtype=bool)
        assert ml(g) == ml(g) == log_marginal_likelihood(data, g)


class TestMoves:
    def test_move_availability(self):
        base = np.array([0.4, 0.4, 0.2])
        np.testing.assert_allclose(_kernels.move_distribution(4, 4, base), [0, 1, 0])
        np.testing.assert_allclose(_kernels.move_distribution(0, 4, base), [1, 0, 0])
        np.testing.assert_allclose(_kernels.move_distribution(2, 4, base), base)

    def test_full_model_only_deletes(self):
        data = make_data(30, 3, beta=[1, 1, 1], seed=3)
        sampler = SpikeSlabSampler(data, np.ones(3), SsModelSpec(lsp=LspConfig(pi0=1.0)))
        state = sampler.make_state([1, 1, 1], s=0.3)
        rng = make_rng(0)
        for _ in range(20):
            new = sampler.ads_step(state, rng)
            assert new.size in (2, 3)
        assert sampler.proposed[_kernels.ADD] == 0 and sampler.proposed[_kernels.SWAP] == 0

    def test_cache_coherence(self, small_data):
        sampler = SpikeSlabSampler(small_data, np.arange(1.0, 7.0), SsModelSpec())
        state = sampler.initial_state()
        rng = make_rng(1)
        for _ in range(300):
            state = sampler.step(state, rng)
            fresh = log_marginal_likelihood(small_data, state.gamma)
            assert abs(state.log_ml - fresh) <= 1e-10 * max(1.0, abs(fresh))

    def test_steps_match_run(self, small_data):
        w = np.arange(1.0, 7.0)
        a = SpikeSlabSampler(small_data, w, SsModelSpec())
        rng = make_rng(9)
        state = a.initial_state()
        incl = np.zeros(6)
        for _ in range(200):
            state = a.step(state, rng)
            incl += state.gamma
        b = SpikeSlabSampler(small_data, w, SsModelSpec()).run(200, 0, make_rng(9))
        np.testing.assert_array_equal(b.mip, incl / 200)


class TestEtaUpdate:
    def test_direct_normalization(self):
        data = make_data(10, 4, seed=0)
        w = np.array([1.0, 2.0, 3.0, 5.0])
        spec = SsModelSpec(lsp=LspConfig(pi0=0.5, b_s=4.0))
        sampler = SpikeSlabSampler(data, w, spec)
        g, s = np.array([0, 1, 0, 1], dtype=bool), 0.3
        probs = sampler.eta_conditional(sampler.make_state(g, s=s))
        # direct evaluation over the 11 atoms
        ref = []
        for eta in (0.0,) + tuple(float(k) for k in range(1, 11)):
            th = s * w**eta / np.mean(w**eta)
            if th.max() >= 1:
                ref.append(0.0)
                continue
            prior = 0.5 if eta == 0 else 0.05
            ref.append(prior * np.prod(np.where(g, th, 1 - th)))
        ref = np.array(ref) / sum(ref)
        np.testing.assert_allclose(probs, ref, rtol=1e-12, atol=1e-300)
        assert ref[-1] == 0.0 and ref[1] > 0  # large eta pushes theta past 1 at this s

    def test_pi0_one(self, small_data):
        sampler = SpikeSlabSampler(small_data, np.arange(1.0, 7.0), SsModelSpec(lsp=LspConfig(pi0=1.0)))
        state = sampler.initial_state()
        rng = make_rng(0)
        for _ in range(100):
            state = sampler.update_eta(state, rng)
            assert state.eta == 0.0

    def test_constant_weights_prior(self, small_data):
        spec = SsModelSpec(lsp=LspConfig(pi0=0.3))
        sampler = SpikeSlabSampler(small_data, np.full(6, 2.0), spec)
        probs = sampler.eta_conditional(sampler.make_state([1, 0, 0, 1, 0, 0], s=0.4))
        np.testing.assert_allclose(probs, np.r_[0.3, np.full(10, 0.07)], rtol=1e-12)


class TestSUpdate:
    def _trace(self, sampler, gamma, n, seed, s0=None):
        state = sampler.make_state(gamma, s=s0)
        rng = make_rng(seed)
        out = np.empty(n)
        for i in range(n):
            state = sampler.update_s(state, rng)
            out[i] = state.s
        return out

    def test_conjugate_when_eta_zero(self, small_data):
        spec = SsModelSpec(lsp=LspConfig(fixed_eta=0.0, b_s=6.0))
        sampler = SpikeSlabSampler(small_data, np.arange(1.0, 7.0), spec)
        g = np.array([1, 1, 0, 0, 1, 0], dtype=bool)
        trace = self._trace(sampler, g, 51_000, 3)[1000:]
        ks = stats.kstest(trace, stats.beta(1 + 3, 6 + 3).cdf).statistic
        assert ks <= 0.02

    def test_constraint_respected(self, small_data):
        w = np.array([1, 1, 1, 1, 1, 10.0])
        spec = SsModelSpec(lsp=LspConfig(fixed_eta=2.0, b_s=1.0))
        sampler = SpikeSlabSampler(small_data, w, spec)
        bound = 1.0 / relative_weights(w, 2.0).max()
        trace = self._trace(sampler, np.ones(6, dtype=bool), 5000, 1, s0=bound * 0.9)
        assert trace.max() < bound

    def test_empty_model_concentrates(self):
        p = 20
        data = make_data(30, p, seed=5)
        spec = SsModelSpec(lsp=LspConfig(fixed_eta=0.0))
        sampler = SpikeSlabSampler(data, np.ones(p), spec)
        trace = self._trace(sampler, np.zeros(p, dtype=bool), 40_000, 2)[1000:]
        batches = trace[: 39_000].reshape(39, 1000).mean(axis=1)
        se = batches.std(ddof=1) / math.sqrt(len(batches))
        assert abs(trace.mean() - 1 / (2 * p + 1)) <= 3 * se + 1e-12


class TestExactness:
    def test_enumeration_tv(self):
        data = p4_fixture()
        w = np.array([1.0, 2.0, 4.0, 1.0])
        spec = SsModelSpec()
        exact = exact_posterior(data, w, spec)
        post = run_chain(data, w, spec, 200_000 + 2000, 2000, seed=1, record_models=True)
        assert tv(post.model_counts, exact) <= 0.02
        mip = np.zeros(4)
        for k, v in exact.items():
            mip[list(k)] += v
        np.testing.assert_allclose(post.mip, mip, atol=0.02)

    def test_enumeration_tv_p3(self):
        data = make_data(20, 3, beta=[0.5, 0.0, 0.3], seed=2)
        w = np.array([1.0, 3.0, 2.0])
        spec = SsModelSpec()
        exact = exact_posterior(data, w, spec)
        post = run_chain(data, w, spec, 202_000, 2000, seed=5, record_models=True)
        assert tv(post.model_counts, exact) <= 0.02

    def test_s_trace_mixture(self):
        data = p4_fixture()
        spec = SsModelSpec(lsp=LspConfig(fixed_eta=0.0))
        exact = exact_posterior(data, np.ones(4), spec)
        a, b = spec.lsp.beta_params(4)

        def cdf(x):
            return sum(v * stats.beta(a + len(k), b + 4 - len(k)).cdf(x) for k, v in exact.items())
        post = run_chain(data, np.ones(4), spec, 202_000, 2000, seed=2)
        assert stats.kstest(post.s_trace, cdf).statistic <= 0.02


class TestRunChain:
    def test_pi0_one_matches_baseline(self, small_data):
        w = np.arange(1.0, 7.0)
        lsp = run_chain(small_data, w, SsModelSpec(lsp=LspConfig(pi0=1.0)), 3000, 500, seed=4)
        base = run_chain(small_data, None, SsModelSpec(), 3000, 500, seed=4)
        np.testing.assert_array_equal(lsp.mip, base.mip)
        np.testing.assert_array_equal(lsp.bma_beta, base.bma_beta)
        np.testing.assert_array_equal(lsp.s_trace, base.s_trace)

    def test_seed_determinism(self, small_data):
        a = run_chain(small_data, np.arange(1.0, 7.0), SsModelSpec(), 2000, 200, seed=8)
        b = run_chain(small_data, np.arange(1.0, 7.0), SsModelSpec(), 2000, 200, seed=8)
        assert a.to_dict(traces=True) == b.to_dict(traces=True)

    def test_null_data(self):
        empty = 0
        for seed in range(50):
            data = make_data(100, 20, seed=1000 + seed)
            post = run_chain(data, None, SsModelSpec(), 5000, 1000, seed=seed)
            empty += post.mpm_gamma.sum() == 0
        assert empty >= 45

    def test_strong_signal(self):
        truth = np.zeros(10, dtype=bool)
        truth[:3] = True
        hits = 0
        for seed in range(50):
            data = make_data(200, 10, beta=5.0 * truth, seed=2000 + seed)
            post = run_chain(data, None, SsModelSpec(), 5000, 1000, seed=seed)
            hits += np.array_equal(post.mpm_gamma, truth)
        assert hits >= 48

    def test_budget(self, small_data):
        with pytest.raises(InvalidBudget):
            run_chain(small_data, None, SsModelSpec(), 100, 100)

    def test_bad_state(self, small_data):
        sampler = SpikeSlabSampler(small_data, np.ones(6), SsModelSpec())
        with pytest.raises(ConfigError):
            sampler.make_state([1, 0], s=0.1)
        with pytest.raises(ConfigError):
            sampler.make_state(np.zeros(6), s=1.5)

    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            SsModelSpec(tau=0)
        with pytest.raises(ConfigError):
            SsModelSpec(move_probs=(1, -1, 0))
