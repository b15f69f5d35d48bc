"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line with the measured quantities and
then asserts. The simulation criteria run at desk scale and take most of
the suite's wall time.
"""

import json
import math
import time
import warnings
from pathlib import Path

import numpy as np
import pytest
from conftest import brute_phi_l1, brute_phi_pairwise, make_data
from oracles import (
    GAMMA_PATTERNS,
    exact_posterior,
    oracle_fixtures,
    p4_fixture,
    quadrature_log_ml,
    tv,
)
from scipy import stats
from sklearn.linear_model import Lasso

from lspvs.cli import main
from lspvs.core import standardize
from lspvs.errors import ThetaOverflow
from lspvs.lasso import (
    LassoCvSpec,
    kkt_violation,
    lasso_cv,
    penalty_factors,
    two_stage_cv,
    weighted_lasso_fit,
)
from lspvs.prior import LspConfig, compute_theta, eta_max, loose_eta_bound
from lspvs.quality import phi_l1, phi_pairwise
from lspvs.simulation import (
    DESK,
    INCLUSION_DESK,
    METHODS,
    eta_sweep,
    generate_dgp,
    inclusion_table,
    run_sweep,
    summarize,
)
from lspvs.spike_slab import SsModelSpec, log_marginal_likelihood, run_chain
from lspvs.ssl import SslSpec, coordinate_descent
from lspvs.synth import (
    DEFAULT_PHI_GRID,
    DeviationModel,
    generate_grid,
    ratio_polynomial,
    solve_ratio,
)

# not used while choosing any configuration
SEED = 2026

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(number, checks):
        ok = all(v for _, v in checks)
        detail = "; ".join(f"{name} {'ok' if v else 'FAILED'}" for name, v in checks)
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")
        return ok
    return emit


@pytest.fixture(scope="session")
def desk_sweep():
    records = run_sweep(DESK, METHODS, DEFAULT_PHI_GRID, replications=50, seed=SEED)
    return {(r["method"], r["target_phi"]): r for r in summarize(records)}


def test_criterion_01_metric_oracle(report):
    rng = np.random.default_rng(SEED)
    cases = []
    for _ in range(1000):
        p = int(rng.integers(2, 11))
        g = rng.random(p) < 0.4
        g[rng.integers(p)] = True
        g[rng.integers(p)] ^= g.all()
        w = rng.integers(1, 6, p).astype(float)
        if np.ptp(w) == 0:
            w[0] += 1.0
        cases.append((g, w))
    t0 = time.perf_counter()
    ours = [(phi_l1(g, w).value, phi_pairwise(g, w).value) for g, w in cases]
    elapsed = time.perf_counter() - t0
    worst = max(max(abs(a - brute_phi_l1(g, w)), abs(b - brute_phi_pairwise(g, w)))
                for (a, b), (g, w) in zip(ours, cases))
    ok = report(1, [(f"max abs error {worst:.1e} <= 1e-12", worst <= 1e-12),
                    (f"runtime {elapsed:.2f}s < 1s", elapsed < 1.0)])
    assert ok


def test_criterion_02_generator_calibration(report):
    g = np.zeros(1000, dtype=bool)
    g[:20] = True
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        for phi, w in zip(DEFAULT_PHI_GRID, generate_grid(1000, g, seed=seed)):
            worst = max(worst, abs(phi_l1(g, w).value - phi))
    elapsed = time.perf_counter() - t0
    ok = report(2, [(f"25-point grid, max |realized - target| {worst:.4f} <= 0.02", worst <= 0.02),
                    (f"runtime {elapsed:.2f}s < 10s", elapsed < 10.0)])
    assert ok


def test_criterion_03_quartic_root(report):
    resid = dev = 0.0
    for phi in np.round(np.arange(0.5, 1.0001, 0.1), 10):
        r = solve_ratio(phi)
        resid = max(resid, abs(ratio_polynomial(r, 4 * (1 - phi))))
        dev = max(dev, abs(DeviationModel.for_phi(phi).expected_deviation() - 4 * (1 - phi)))
    ends = solve_ratio(1.0) == 0.0 and solve_ratio(0.5) == 1.0
    ok = report(3, [(f"residual {resid:.1e} < 1e-12", resid < 1e-12),
                    (f"E[D] error {dev:.1e} <= 1e-9", dev <= 1e-9),
                    ("endpoints exact", ends)])
    assert ok


def test_criterion_04_marginal_likelihood_oracle(report):
    t0 = time.perf_counter()
    worst = 0.0
    for i, data in enumerate(oracle_fixtures()):
        g = np.array(GAMMA_PATTERNS[i % 4], dtype=bool)
        closed = log_marginal_likelihood(data, g)
        quad = quadrature_log_ml(data, g, rtol=1e-9)
        worst = max(worst, abs(closed - quad) / abs(quad))
    elapsed = time.perf_counter() - t0
    ok = report(4, [(f"20 fixtures, max rel error {worst:.1e} < 1e-6", worst < 1e-6),
                    (f"runtime {elapsed:.1f}s < 60s", elapsed < 60.0)])
    assert ok


def test_criterion_05_sampler_exactness(report):
    data = p4_fixture()
    w = np.array([1.0, 2.0, 4.0, 1.0])
    spec = SsModelSpec()
    post = run_chain(data, w, spec, 202_000, 2000, seed=SEED, record_models=True)
    dist = tv(post.model_counts, exact_posterior(data, w, spec))

    base = SsModelSpec(lsp=LspConfig(fixed_eta=0.0))
    exact = exact_posterior(data, np.ones(4), base)
    a, b = base.lsp.beta_params(4)

    def cdf(x):
        return sum(v * stats.beta(a + len(k), b + 4 - len(k)).cdf(x) for k, v in exact.items())
    trace = run_chain(data, np.ones(4), base, 202_000, 2000, seed=SEED).s_trace
    ks = stats.kstest(trace, cdf).statistic
    ok = report(5, [(f"TV {dist:.4f} <= 0.02 over 200k iterations", dist <= 0.02),
                    (f"s-trace KS {ks:.4f} <= 0.02", ks <= 0.02)])
    assert ok


def test_criterion_06_collapse_to_baseline(report):
    identical = True
    for seed in range(5):
        data, gamma, _ = generate_dgp(DESK, seed)
        data = standardize(data)[0]
        w = np.where(gamma, 5.0, 1.0)
        a = run_chain(data, w, SsModelSpec(lsp=LspConfig(pi0=1.0)), 3000, 500, seed=seed)
        b = run_chain(data, None, SsModelSpec(), 3000, 500, seed=seed)
        identical &= a.to_dict(traces=True) == b.to_dict(traces=True)

    lasso_gap = 0.0
    for seed in range(5):
        data, gamma, _ = generate_dgp(DESK, seed)
        w = np.where(gamma, 5.0, 1.0)
        pinned = two_stage_cv(data, w, LassoCvSpec(eta_grid=(0.0,)), seed=seed)
        plain = lasso_cv(data, seed=seed)
        lasso_gap = max(lasso_gap, float(np.abs(pinned.beta - plain.beta).max()))
        centered = standardize(data)[0]
        model = Lasso(alpha=pinned.lam / data.n, fit_intercept=False, tol=1e-16, max_iter=1_000_000)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model.fit(centered.X, centered.y)
        lasso_gap = max(lasso_gap, float(np.abs(pinned.beta - model.coef_).max()))

    ssl_gap = 0.0
    for seed in range(5):
        data = standardize(generate_dgp(DESK, seed)[0])[0]
        lam = 3.0
        beta = coordinate_descent(data, np.ones(data.p), SslSpec(lambda1=lam, tol=1e-14,
                                                                 max_iterations=100_000), lam, 0.0, 0.3)
        model = Lasso(alpha=lam / data.n, fit_intercept=False, tol=1e-16, max_iter=1_000_000)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model.fit(data.X, data.y)
        ssl_gap = max(ssl_gap, float(np.abs(beta - model.coef_).max()))
    ok = report(6, [("pi0=1 bit-identical to baseline SS", identical),
                    (f"eta=0 LLM-Lasso vs Lasso {lasso_gap:.1e} <= 1e-10", lasso_gap <= 1e-10),
                    (f"lambda0=lambda1 SSL vs Lasso {ssl_gap:.1e} <= 1e-8", ssl_gap <= 1e-8)])
    assert ok


def test_criterion_07_weight_quality_trend(report, desk_sweep):
    def f1(m, phi):
        return desk_sweep[(m, phi)]["mean_f1"]
    gap_lo = f1("lsp_ss", 0.5) - f1("ss", 0.5)
    gap_hi = f1("lsp_ss", 0.95) - f1("ss", 0.95)
    rhos = {m: stats.spearmanr(DEFAULT_PHI_GRID, [f1(m, phi) for phi in DEFAULT_PHI_GRID]).statistic
            for m in ("lsp_ss", "lsp_ssl", "llm_lasso")}
    flat = {}
    for m in ("ss", "ssl", "lasso"):
        means = [f1(m, phi) for phi in DEFAULT_PHI_GRID]
        se = np.nanmean([desk_sweep[(m, phi)]["se_f1"] for phi in DEFAULT_PHI_GRID])
        flat[m] = (np.ptp(means), se)
    checks = [(f"(a) |gap| at 0.5 = {abs(gap_lo):.3f} <= 0.05", abs(gap_lo) <= 0.05),
              (f"(b) gap at 0.95 = {gap_hi:.3f} >= 0.15 (baseline F1 {f1('ss', 0.95):.3f})",
               gap_hi >= 0.15)]
    checks += [(f"(c) spearman {m} {r:.3f} >= 0.9 (F1 {[round(f1(m, phi), 2) for phi in DEFAULT_PHI_GRID]})",
                r >= 0.9) for m, r in rhos.items()]
    checks += [(f"(d) {m} range {rng:.3f} <= 2 SE {2 * se:.3f}", rng <= 2 * se) for m, (rng, se) in flat.items()]
    assert report(7, checks)


def test_criterion_08_grouped_inclusion(report):
    tables = inclusion_table(INCLUSION_DESK, ("lsp_ss", "ss", "llm_lasso"), phi=0.7, replications=200,
                             seed=SEED)
    lsp, ss, llm = tables["lsp_ss"], tables["ss"], tables["llm_lasso"]
    checks = []
    for g in (0, 1):
        row = lsp.row(g)
        checks.append((f"LSP (SS) gamma={g} strictly increasing {np.round(row, 4).tolist()}",
                       bool(np.all(np.diff(row) > 0))))
        checks.append((f"SS gamma={g} spread {np.ptp(ss.row(g)):.4f} <= 0.01", bool(np.ptp(ss.row(g)) <= 0.01)))
    lo, hi = llm.cell(1, 1.0), llm.cell(1, 5.0)
    checks.append((f"LLM-Lasso (1, w=1) {lo:.3f} < 0.1", lo < 0.1))
    checks.append((f"LLM-Lasso (1, w=5) {hi:.3f} > 0.8", hi > 0.8))
    assert report(8, checks)


def test_criterion_09_eta_sensitivity(report):
    checks = []
    for phi in (0.8, 0.9):
        rows = eta_sweep(DESK, phi, range(1, 11), replications=50, seed=SEED)
        for m in ("lsp_ss", "lsp_ssl"):
            prior = next(r["mean_l1"] for r in rows if r["method"] == m and r["eta"] == "prior")
            best = min(r["mean_l1"] for r in rows if r["method"] == m and r["eta"] != "prior")
            checks.append((f"phi {phi} {m} prior {prior:.3f} <= 1.1 x best fixed {best:.3f}",
                           prior <= 1.1 * best))
    assert report(9, checks)


def test_criterion_10_lsp_invariants(report):
    rng = np.random.default_rng(SEED)
    mean_err = 0.0
    for _ in range(10_000):
        p = int(rng.integers(2, 60))
        w = rng.uniform(0.5, 10, p)
        s = rng.uniform(1e-3, 0.5)
        eta = rng.uniform(0, min(eta_max(w, s), 10.0)) * 0.99
        mean_err = max(mean_err, abs(compute_theta(w, s, eta).mean() - s))

    boundary_ok, tested = True, 0
    for _ in range(500):
        p = int(rng.integers(2, 40))
        w = rng.integers(1, 6, p).astype(float)
        s = rng.uniform(0.01, 0.9)
        bound = eta_max(w, s)
        if not math.isfinite(bound) or bound < 1e-6:
            continue
        tested += 1
        compute_theta(w, s, 0.999 * bound)
        try:
            compute_theta(w, s, 1.001 * bound)
            boundary_ok = False
        except ThetaOverflow:
            pass
        boundary_ok &= bound >= loose_eta_bound(w, s) - 1e-9

    kkt = 0.0
    for i in range(300):
        n, p = int(rng.integers(5, 60)), int(rng.integers(1, 80))
        data = make_data(n, p, beta=rng.normal(0, 2, p) * (rng.random(p) < 0.3), seed=i)
        w = rng.integers(1, 6, p).astype(float)
        eta, lam = rng.uniform(0, 4), rng.uniform(0.2, 30)
        beta = weighted_lasso_fit(data, w, eta, lam)
        kkt = max(kkt, kkt_violation(data, beta, lam * penalty_factors(w, eta)))
    ok = report(10, [(f"mean theta error {mean_err:.1e} <= 1e-12", mean_err <= 1e-12),
                     (f"eta_max boundary on {tested} instances", boundary_ok and tested > 100),
                     (f"max KKT violation {kkt:.1e} <= 1e-6", kkt <= 1e-6)])
    assert ok


def _pipeline(root: Path, cfg_dir: Path):
    def cli(*argv):
        assert main([str(a) for a in argv] + ["--out-dir", str(root)]) == 0

    cli("weights", "synth", "--gamma", cfg_dir / "g.json", "--phi", 0.7, "--data", cfg_dir / "d.csv",
        "--seed", 5, "--out", root / "synth.json")
    cli("weights", "ingest", "--scores", root / "synth.json", "--data", cfg_dir / "d.csv",
        "--out", root / "ingested.json")
    cli("weights", "eval", "--gamma", cfg_dir / "g.json", "--weights", root / "synth.json",
        "--out", root / "eval.json")
    cli("weights", "aggregate", "--inputs", root / "synth.json", cfg_dir / "w2.json", "--mode", "median",
        "--out", root / "agg.json")
    cli("fit", "ss", "--data", cfg_dir / "d.csv", "--weights", root / "synth.json", "--samples", 2000,
        "--burn-in", 500, "--seed", 7, "--out", root / "ss.json")
    cli("fit", "ssl", "--data", cfg_dir / "d.csv", "--weights", root / "synth.json", "--seed", 7,
        "--out", root / "ssl.json", "--coef-out", root / "ssl.csv")
    cli("fit", "lasso", "--data", cfg_dir / "d.csv", "--seed", 7, "--out", root / "lasso.json")
    cli("fit", "llm-lasso", "--data", cfg_dir / "d.csv", "--weights", root / "synth.json", "--seed", 7,
        "--out", root / "llm.json", "--coef-out", root / "llm.csv")
    cli("simulate", "--config", cfg_dir / "sim.json")
    cli("eta-sweep", "--config", cfg_dir / "eta.json")
    cli("report", "--in", root / "summary.csv")
    cli("report", "--in", root / "eta_sweep.csv")


def test_criterion_11_round_trip_and_determinism(report, tmp_path, capsys):
    data = make_data(40, 8, beta=[1.5, 0, -1, 0, 0, 2, 0, 0], seed=3)
    from lspvs.core import write_dataset
    from lspvs.scores import write_scores
    write_dataset(tmp_path / "d.csv", data)
    (tmp_path / "g.json").write_text(json.dumps([1, 0, 1, 0, 0, 1, 0, 0]))
    write_scores(tmp_path / "w2.json", [5, 1, 4, 2, 1, 5, 3, 1])
    sim = {"dgp": {"n": 30, "p": 20, "n_active": 3}, "settings": {"n_samples": 500, "burn_in": 100},
           "phi_grid": [0.5, 0.75, 1.0], "replications": 2, "seed": 1}
    (tmp_path / "sim.json").write_text(json.dumps(sim))
    eta = {k: v for k, v in sim.items() if k != "phi_grid"}
    (tmp_path / "eta.json").write_text(json.dumps(dict(eta, phi=0.8, eta_values=[1, 2])))

    _pipeline(tmp_path / "a", tmp_path)
    _pipeline(tmp_path / "b", tmp_path)
    capsys.readouterr()
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    same = [n for n in names if (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()]
    round_trip = (tmp_path / "a" / "synth.json").read_bytes() == (tmp_path / "a" / "ingested.json").read_bytes()
    ok = report(11, [("synth -> ingest identical", round_trip),
                     (f"{len(same)}/{len(names)} artifacts byte-identical", len(same) == len(names))])
    assert ok
