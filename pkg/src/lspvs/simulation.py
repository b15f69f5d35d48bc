"""Weight-quality simulation study: data generation, method fits, scoring, summaries.

Replications are the unit of work. One replication draws one dataset and
reuses it across the whole phi grid, so curves over phi are paired
comparisons; only the synthetic weights change from cell to cell. Methods
that never look at the weights are fit once per replication.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import RegressionData, RngSeed, make_rng, standardize
from .errors import ConfigError, LspError
from .lasso import LassoCvSpec, lasso_cv, two_stage_cv
from .prior import LspConfig
from .quality import phi_l1
from .spike_slab import SsModelSpec, run_chain
from .ssl import NonConvergenceWarning, SslSpec, run_path
from .synth import DEFAULT_PHI_GRID, generate_weights

METHODS = ("lsp_ss", "ss", "lsp_ssl", "ssl", "llm_lasso", "lasso")
WEIGHT_BLIND = frozenset({"ss", "ssl", "lasso"})
LABELS = {
    "lsp_ss": "LSP (SS)", "ss": "SS", "lsp_ssl": "LSP (SSL)", "ssl": "SSL",
    "llm_lasso": "LLM-Lasso", "lasso": "Lasso",
}

# stream ids under the sweep seed
_DATA, _WEIGHTS, _BLIND, _INFORMED = 0, 1, 2, 3


@dataclass(frozen=True)
class DgpSpec:
    n: int
    p: int
    n_active: int = 20
    coef: float = 1.0
    intercept: float = 1.0
    rho: float = 0.5
    noise_var: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ConfigError("n and p must be positive", field="n" if self.n < 1 else "p")
        if not 0 <= self.n_active <= self.p:
            raise ConfigError(f"n_active must lie in [0, {self.p}]", field="n_active")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError("rho must lie in [0, 1)", field="rho")
        if self.noise_var < 0:
            raise ConfigError("noise_var must be nonnegative", field="noise_var")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> DgpSpec:
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown dgp fields {sorted(extra)}", field=f"dgp.{sorted(extra)[0]}")
        return cls(**d)


DESK = DgpSpec(n=50, p=100, n_active=5)
# grouped inclusion needs many active features per (gamma*, w) cell
INCLUSION_DESK = DgpSpec(n=50, p=300, n_active=20)
FULL_N100 = DgpSpec(n=100, p=1000, n_active=20)
FULL_N250 = DgpSpec(n=250, p=1000, n_active=20)


def generate_dgp(spec: DgpSpec, seed) -> tuple[RegressionData, np.ndarray, np.ndarray]:
    """Equicorrelated Gaussian design via a single shared factor per row."""
    rng = make_rng(seed)
    z = rng.standard_normal((spec.n, 1))
    E = rng.standard_normal((spec.n, spec.p))
    X = math.sqrt(spec.rho) * z + math.sqrt(1.0 - spec.rho) * E
    gamma = np.zeros(spec.p, dtype=bool)
    gamma[rng.permutation(spec.p)[: spec.n_active]] = True
    beta = np.where(gamma, spec.coef, 0.0)
    eps = math.sqrt(spec.noise_var) * rng.standard_normal(spec.n)
    y = X @ beta + spec.intercept + eps
    return RegressionData(y, X), gamma, beta


def f1_score(support_hat, gamma_star) -> float:
    s = np.asarray(support_hat, dtype=bool)
    g = np.asarray(gamma_star, dtype=bool)
    tp = int(np.sum(s & g))
    fp = int(np.sum(s & ~g))
    fn = int(np.sum(~s & g))
    if tp + fp + fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)


def evaluate_fit(beta_hat, support_hat, gamma_star, beta_star) -> tuple[float, float]:
    """(F1 of the recovered support, l1 distance of the coefficients)."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    if beta_hat.shape != beta_star.shape or np.shape(support_hat) != np.shape(gamma_star):
        raise ConfigError("estimate and truth differ in length", field="beta_hat")
    return f1_score(support_hat, gamma_star), float(np.abs(beta_hat - beta_star).sum())


@dataclass(frozen=True)
class EvalRecord:
    method: str
    target_phi: float
    realized_phi: float
    f1: float
    l1_error: float
    replication: int
    seed: int
    hyper: dict = field(default_factory=dict)
    error: str = ""

    FIELDS = ("method", "target_phi", "realized_phi", "f1", "l1_error",
              "replication", "seed", "hyper", "error")

    def row(self) -> dict:
        d = {k: getattr(self, k) for k in self.FIELDS}
        d["hyper"] = json.dumps(self.hyper, sort_keys=True)
        for k in ("target_phi", "realized_phi", "f1", "l1_error"):
            d[k] = repr(float(d[k]))
        return d

    @classmethod
    def from_row(cls, row: dict) -> EvalRecord:
        return cls(
            method=row["method"], target_phi=float(row["target_phi"]),
            realized_phi=float(row["realized_phi"]), f1=float(row["f1"]),
            l1_error=float(row["l1_error"]), replication=int(row["replication"]),
            seed=int(row["seed"]), hyper=json.loads(row["hyper"] or "{}"), error=row["error"],
        )


@dataclass(frozen=True)
class MethodSettings:
    """Hyperparameters shared by every cell of a sweep."""

    n_samples: int = 5000
    burn_in: int = 1000
    ss: SsModelSpec = field(default_factory=SsModelSpec)
    ssl: SslSpec = field(default_factory=SslSpec)
    lasso: LassoCvSpec = field(default_factory=LassoCvSpec)

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples, "burn_in": self.burn_in,
            "ss": {"tau": self.ss.tau, "a_sigma": self.ss.a_sigma, "b_sigma": self.ss.b_sigma,
                   "lsp": self.ss.lsp.to_dict()},
            "ssl": {"lambda1": self.ssl.lambda1, "grid_size": self.ssl.grid_size,
                    "lsp": self.ssl.lsp.to_dict()},
            "lasso": {"folds": self.lasso.folds,
                      "eta_grid": list(self.lasso.eta_grid)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> MethodSettings:
        d = dict(d)
        extra = set(d) - {"n_samples", "burn_in", "ss", "ssl", "lasso"}
        if extra:
            raise ConfigError(f"unknown method fields {sorted(extra)}", field=f"methods.{sorted(extra)[0]}")
        out = cls(n_samples=int(d.get("n_samples", 5000)), burn_in=int(d.get("burn_in", 1000)))
        if "ss" in d:
            ss = dict(d["ss"])
            lsp = LspConfig.from_dict(ss.pop("lsp")) if "lsp" in ss else LspConfig()
            try:
                out = replace(out, ss=SsModelSpec(lsp=lsp, **ss))
            except TypeError as exc:
                raise ConfigError(str(exc), field="methods.ss") from None
        if "ssl" in d:
            ssl = dict(d["ssl"])
            lsp = LspConfig.from_dict(ssl.pop("lsp")) if "lsp" in ssl else LspConfig()
            try:
                out = replace(out, ssl=SslSpec(lsp=lsp, **ssl))
            except TypeError as exc:
                raise ConfigError(str(exc), field="methods.ssl") from None
        if "lasso" in d:
            lz = dict(d["lasso"])
            for k in ("eta_grid", "log_lambda_grid"):
                if k in lz:
                    lz[k] = tuple(float(v) for v in lz[k])
            try:
                out = replace(out, lasso=LassoCvSpec(**lz))
            except TypeError as exc:
                raise ConfigError(str(exc), field="methods.lasso") from None
        return out


@dataclass
class FitOutcome:
    beta: np.ndarray
    support: np.ndarray
    inclusion: np.ndarray  # MIP for samplers, 0/1 selection otherwise
    hyper: dict


def _seed_int(seed: RngSeed) -> int:
    # a stable scalar summary of the stream, for the record only
    return int(np.random.SeedSequence(seed.seed, spawn_key=seed.stream_id).generate_state(1)[0])


def baseline_lsp(lsp: LspConfig) -> LspConfig:
    """The same hyperprior with the weights switched off."""
    return replace(lsp, pi0=1.0, fixed_eta=None)


def fit_method(method: str, data: RegressionData, w, settings: MethodSettings, seed,
               lsp: LspConfig | None = None) -> FitOutcome:
    """Fit one method on raw (uncentered) data. ``lsp`` overrides the LSP hyperprior."""
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}", field="methods")
    if method in ("lsp_ss", "ss"):
        centered, _ = standardize(data)
        spec = settings.ss
        if lsp is not None:
            spec = replace(spec, lsp=lsp)
        if method == "ss":
            spec = replace(spec, lsp=baseline_lsp(spec.lsp))
        weights = np.ones(data.p) if method == "ss" else w
        post = run_chain(centered, weights, spec, settings.n_samples, settings.burn_in, seed)
        eta_mean = float(post.eta_trace.mean())
        return FitOutcome(post.bma_beta, post.mpm_gamma, post.mip,
                          {"eta_mean": eta_mean, "s_mean": float(post.s_trace.mean())})
    if method in ("lsp_ssl", "ssl"):
        centered, _ = standardize(data)
        spec = settings.ssl
        if lsp is not None:
            spec = replace(spec, lsp=lsp)
        if method == "ssl":
            spec = replace(spec, lsp=baseline_lsp(spec.lsp))
        weights = np.ones(data.p) if method == "ssl" else w
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            path = run_path(centered, weights, spec)
        rec = path.final
        sel = rec.beta != 0
        return FitOutcome(rec.beta, sel, sel.astype(float),
                          {"lambda0": rec.lambda0, "eta": rec.eta, "s": rec.s})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        if method == "lasso":
            res = lasso_cv(data, settings.lasso, seed)
        else:
            res = two_stage_cv(data, w, settings.lasso, seed)
    sel = res.beta != 0
    return FitOutcome(res.beta, sel, sel.astype(float), {"eta": res.eta, "log_lambda": res.log_lambda})


def _method_seed(root: RngSeed, method: str, rep: int, k: int | None) -> RngSeed:
    m = METHODS.index(method)
    if method in WEIGHT_BLIND:
        return root.child(_BLIND, rep, m)
    return root.child(_INFORMED, rep, k, m)


def _failed(method, phi, realized, rep, seed, exc) -> EvalRecord:
    code = exc.code if isinstance(exc, LspError) else type(exc).__name__
    return EvalRecord(method, phi, realized, math.nan, math.nan, rep, seed, {}, f"{code}: {exc}")


def run_replication(dgp: DgpSpec, methods, phi_grid, rep: int, seed: int,
                    settings: MethodSettings) -> list[EvalRecord]:
    """Every (phi, method) cell of one replication, in grid order then method order."""
    root = RngSeed(seed)
    data, gamma, beta = generate_dgp(dgp, root.child(_DATA, rep))
    methods = [m for m in METHODS if m in set(methods)]
    weights = [generate_weights(dgp.p, gamma, phi, root.child(_WEIGHTS, rep, k))
               for k, phi in enumerate(phi_grid)]
    realized = [float(phi_l1(gamma, w)) if gamma.any() and not gamma.all() else math.nan
                for w in weights]

    blind = {}
    for m in methods:
        if m in WEIGHT_BLIND:
            s = _method_seed(root, m, rep, None)
            try:
                fit = fit_method(m, data, None, settings, s)
                blind[m] = (evaluate_fit(fit.beta, fit.support, gamma, beta), fit.hyper, s)
            except (LspError, FloatingPointError, np.linalg.LinAlgError) as exc:
                blind[m] = (exc, None, s)

    out = []
    for k, phi in enumerate(phi_grid):
        for m in methods:
            if m in WEIGHT_BLIND:
                res, hyper, s = blind[m]
                if isinstance(res, Exception):
                    out.append(_failed(m, phi, realized[k], rep, _seed_int(s), res))
                else:
                    out.append(EvalRecord(m, phi, realized[k], res[0], res[1], rep, _seed_int(s), hyper))
                continue
            s = _method_seed(root, m, rep, k)
            try:
                fit = fit_method(m, data, weights[k], settings, s)
                f1, l1 = evaluate_fit(fit.beta, fit.support, gamma, beta)
                out.append(EvalRecord(m, phi, realized[k], f1, l1, rep, _seed_int(s), fit.hyper))
            except (LspError, FloatingPointError, np.linalg.LinAlgError) as exc:
                out.append(_failed(m, phi, realized[k], rep, _seed_int(s), exc))
    return out


def _run_tasks(fn, args_list, workers: int):
    if workers <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *a) for a in args_list]
        return [f.result() for f in futures]


def run_sweep(dgp: DgpSpec, methods=METHODS, phi_grid=DEFAULT_PHI_GRID, replications: int = 50,
              seed: int = 0, settings: MethodSettings | None = None, workers: int = 1) -> list[EvalRecord]:
    """All replications; the output order does not depend on ``workers``."""
    settings = settings or MethodSettings()
    if replications < 1:
        raise ConfigError("replications must be positive", field="replications")
    bad = set(methods) - set(METHODS)
    if bad:
        raise ConfigError(f"unknown methods {sorted(bad)}", field="methods")
    phi_grid = tuple(float(v) for v in phi_grid)
    tasks = [(dgp, tuple(methods), phi_grid, r, seed, settings) for r in range(replications)]
    return [rec for chunk in _run_tasks(run_replication, tasks, workers) for rec in chunk]


def mean_se(values) -> tuple[float, float, int]:
    v = np.asarray([x for x in values if not math.isnan(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan, 0
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
    return float(v.mean()), se, int(v.size)


SUMMARY_FIELDS = ("method", "target_phi", "n", "failures", "mean_f1", "se_f1",
                  "mean_l1", "se_l1", "mean_realized_phi", "f1_rounded", "l1_rounded")


def summarize(records) -> list[dict]:
    """Mean and standard error per (method, target phi)."""
    cells: dict[tuple[str, float], list[EvalRecord]] = {}
    for r in records:
        cells.setdefault((r.method, r.target_phi), []).append(r)
    order = {m: i for i, m in enumerate(METHODS)}
    rows = []
    for (m, phi) in sorted(cells, key=lambda c: (order.get(c[0], 99), c[1])):
        recs = cells[(m, phi)]
        f1, se_f1, n = mean_se(r.f1 for r in recs)
        l1, se_l1, _ = mean_se(r.l1_error for r in recs)
        rphi, _, _ = mean_se(r.realized_phi for r in recs)
        rows.append({
            "method": m, "target_phi": phi, "n": n, "failures": sum(bool(r.error) for r in recs),
            "mean_f1": f1, "se_f1": se_f1, "mean_l1": l1, "se_l1": se_l1,
            "mean_realized_phi": rphi,
            "f1_rounded": f"{f1:.3f}", "l1_rounded": f"{l1:.3f}",
        })
    return rows


def curves(rows, metric: str = "f1") -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """method -> (phi, mean, se) arrays from summary rows."""
    out: dict[str, list] = {}
    for r in rows:
        out.setdefault(r["method"], []).append(
            (float(r["target_phi"]), float(r[f"mean_{metric}"]), float(r[f"se_{metric}"])))
    return {m: tuple(np.array(c) for c in zip(*sorted(v))) for m, v in out.items()}


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def write_records(path, records) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=EvalRecord.FIELDS, lineterminator="\n")
        wr.writeheader()
        for r in records:
            wr.writerow(r.row())


def read_records(path) -> list[EvalRecord]:
    with open(path, newline="") as fh:
        return [EvalRecord.from_row(row) for row in csv.DictReader(fh)]


def write_summary(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        wr.writeheader()
        for r in rows:
            wr.writerow({k: _fmt(r[k]) for k in SUMMARY_FIELDS})


def read_summary(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"method", "target_phi", "mean_f1", "se_f1"} <= set(rows[0]):
        raise ConfigError(f"{path} is not a sweep summary", field="in")
    for r in rows:
        for k in ("target_phi", "mean_f1", "se_f1", "mean_l1", "se_l1"):
            r[k] = float(r[k])
    return rows


# -- grouped inclusion ------------------------------------------------------


@dataclass
class GroupTable:
    """Mean inclusion per (true status, weight value). Empty cells hold NaN."""

    weight_values: tuple
    mean: dict
    count: dict

    def cell(self, gamma: int, w) -> float:
        return self.mean[(gamma, w)]

    def row(self, gamma: int) -> np.ndarray:
        return np.array([self.mean[(gamma, w)] for w in self.weight_values])

    def empty_cells(self) -> list:
        return [c for c, n in self.count.items() if n == 0]

    def to_dict(self) -> dict:
        return {
            f"gamma={g},w={w:g}": (None if math.isnan(self.mean[(g, w)]) else self.mean[(g, w)])
            for g in (0, 1) for w in self.weight_values
        }


def mip_by_group(inclusion, weights, gammas, weight_blind: bool = False,
                 weight_values=None) -> GroupTable:
    """Pool per-feature inclusion over replications into (gamma*, w) cells.

    Each argument is a sequence with one vector per replication (a single
    vector is accepted too). With ``weight_blind=True`` the method is known
    not to depend on the weights. The weights are then exchangeable within a
    gamma* group, so each cell's expectation equals the group mean, and that
    lower-variance estimate is reported in every non-empty cell.
    """
    inc = [np.atleast_1d(np.asarray(v, dtype=float)) for v in _as_list(inclusion)]
    ws = [np.atleast_1d(np.asarray(v, dtype=float)) for v in _as_list(weights)]
    gs = [np.atleast_1d(np.asarray(v, dtype=bool)) for v in _as_list(gammas)]
    if not (len(inc) == len(ws) == len(gs)) or any(
            a.shape != b.shape or a.shape != c.shape for a, b, c in zip(inc, ws, gs)):
        raise ConfigError("inclusion, weights and gammas must align", field="inclusion")
    I, W, G = np.concatenate(inc), np.concatenate(ws), np.concatenate(gs)
    values = tuple(sorted(set(W.tolist()))) if weight_values is None else tuple(weight_values)
    mean, count = {}, {}
    for g in (0, 1):
        in_group = G == bool(g)
        group_mean = float(I[in_group].mean()) if in_group.any() else math.nan
        for w in values:
            sel = in_group & (W == w)
            count[(g, w)] = int(sel.sum())
            if not sel.any():
                mean[(g, w)] = math.nan
            elif weight_blind:
                mean[(g, w)] = group_mean
            else:
                mean[(g, w)] = float(I[sel].mean())
    return GroupTable(values, mean, count)


def _as_list(x):
    if isinstance(x, np.ndarray) and x.ndim == 1:
        return [x]
    x = list(x)
    if x and np.ndim(x[0]) == 0:
        return [np.asarray(x)]
    return x


def _inclusion_replication(dgp, methods, phi, rep, seed, settings):
    root = RngSeed(seed)
    data, gamma, _ = generate_dgp(dgp, root.child(_DATA, rep))
    w = generate_weights(dgp.p, gamma, phi, root.child(_WEIGHTS, rep, 0))
    out = {}
    for m in methods:
        fit = fit_method(m, data, w, settings, _method_seed(root, m, rep, 0))
        out[m] = fit.inclusion
    return out, w, gamma


def inclusion_table(dgp: DgpSpec, methods=METHODS, phi: float = 0.70, replications: int = 50,
                    seed: int = 0, settings: MethodSettings | None = None,
                    workers: int = 1) -> dict[str, GroupTable]:
    """Grouped mean inclusion for each method at one weight quality."""
    settings = settings or MethodSettings()
    methods = [m for m in METHODS if m in set(methods)]
    tasks = [(dgp, methods, float(phi), r, seed, settings) for r in range(replications)]
    results = _run_tasks(_inclusion_replication, tasks, workers)
    ws = [r[1] for r in results]
    gs = [r[2] for r in results]
    values = (1.0, 2.0, 3.0, 4.0, 5.0)
    return {
        m: mip_by_group([r[0][m] for r in results], ws, gs,
                        weight_blind=m in WEIGHT_BLIND, weight_values=values)
        for m in methods
    }


# -- fixed-eta sensitivity -------------------------------------------------


def _eta_replication(dgp, methods, phi, etas, rep, seed, settings):
    root = RngSeed(seed)
    data, gamma, beta = generate_dgp(dgp, root.child(_DATA, rep))
    w = generate_weights(dgp.p, gamma, phi, root.child(_WEIGHTS, rep, 0))
    out = []
    for m in methods:
        base = settings.ss.lsp if m == "lsp_ss" else settings.ssl.lsp
        configs = [("prior", base)] + [
            (repr(float(e)), baseline_lsp(base) if e == 0 else replace(base, fixed_eta=float(e)))
            for e in etas
        ]
        s = _method_seed(root, m, rep, 0)
        for label, lsp in configs:
            try:
                fit = fit_method(m, data, w, settings, s, lsp=lsp)
                out.append((m, label, evaluate_fit(fit.beta, fit.support, gamma, beta)[1]))
            except LspError:
                out.append((m, label, math.nan))
    return out


def eta_sweep(dgp: DgpSpec, phi: float, eta_values, replications: int = 50, seed: int = 0,
              settings: MethodSettings | None = None, methods=("lsp_ss", "lsp_ssl"),
              workers: int = 1) -> list[dict]:
    """Mean l1 error at each fixed eta and under the zero-inflated hyperprior.

    Every configuration within a replication shares data, weights and the
    sampler seed. ``eta = 0`` is run as the weight-free baseline.
    """
    settings = settings or MethodSettings()
    bad = set(methods) - {"lsp_ss", "lsp_ssl"}
    if bad:
        raise ConfigError(f"eta sweep supports lsp_ss and lsp_ssl, not {sorted(bad)}", field="methods")
    etas = [float(e) for e in eta_values]
    if any(e < 0 for e in etas):
        raise ConfigError("eta values must be nonnegative", field="eta_values")
    tasks = [(dgp, tuple(methods), float(phi), tuple(etas), r, seed, settings)
             for r in range(replications)]
    results = [x for chunk in _run_tasks(_eta_replication, tasks, workers) for x in chunk]
    rows = []
    for m in methods:
        for label in ["prior"] + [repr(e) for e in etas]:
            mean, se, n = mean_se(v for mm, lab, v in results if mm == m and lab == label)
            rows.append({"method": m, "eta": label, "mean_l1": mean, "se_l1": se, "n": n})
    return rows
