"""Command-line entry point: ``lspvs <command> [<subcommand>] [options]``.

Failures print a JSON object {"error": {"code", "message", "field"?}} to
stderr and exit nonzero. Outputs without an explicit path go to
``--out-dir``, else $LSPVS_OUTPUT_DIR, else the working directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .core import as_gamma, read_dataset, standardize
from .errors import ConfigError, LspError, ParseError, UnknownCommand
from .lasso import LassoCvSpec, lasso_cv, two_stage_cv
from .prior import LspConfig
from .quality import phi_l1, phi_pairwise, phi_plugin
from .scores import aggregate_weight_draws, ingest_scores, read_scores, write_scores
from .spike_slab import SsModelSpec, run_chain
from .ssl import NonConvergenceWarning, SslSpec, run_path
from .synth import generate_weights

ENV_OUTPUT_DIR = "LSPVS_OUTPUT_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        code = UnknownCommand if "invalid choice" in message or "required: command" in message else ConfigError
        raise code(f"{self.prog}: {message}", field=self.prog.split(" ", 1)[-1] or "command")


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, allow_nan=False)


def _out_path(args, explicit, default_name) -> Path:
    if explicit:
        Path(explicit).parent.mkdir(parents=True, exist_ok=True)
        return Path(explicit)
    base = args.out_dir or os.environ.get(ENV_OUTPUT_DIR) or "."
    Path(base).mkdir(parents=True, exist_ok=True)
    return Path(base) / default_name


def _emit(args, payload, explicit=None, default_name=None) -> None:
    text = _dump(payload)
    if explicit or default_name and (args.out_dir or os.environ.get(ENV_OUTPUT_DIR)):
        path = _out_path(args, explicit, default_name)
        path.write_text(text + "\n")
    print(text)


def _load_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})", field=what) from None


def _load_gamma(path) -> np.ndarray:
    doc = _load_json(path, "gamma")
    if isinstance(doc, dict):
        doc = doc.get("gamma")
    if not isinstance(doc, list):
        raise ParseError(f"{path}: expected a list or {{\"gamma\": [...]}}", field="gamma")
    return as_gamma(doc)


def _load_weights(args, names=None) -> np.ndarray:
    rng_ = tuple(args.range)
    if names is None or args.by_order:
        recs = read_scores(args.weights, rng_, integer=False)
        if names is not None and len(recs) != len(names):
            raise ConfigError(f"{len(recs)} scores for {len(names)} features", field="weights")
        return np.array([r.importance for r in recs])
    return ingest_scores(args.weights, names, rng_, fill_missing=args.fill_missing,
                         integer=False).weights


def _lsp(args) -> LspConfig:
    kw = {"a_s": args.a_s, "b_s": args.b_s, "pi0": args.pi0}
    if args.eta_grid:
        kw["eta_grid"] = tuple(args.eta_grid)
    if args.fixed_eta is not None:
        kw["fixed_eta"] = args.fixed_eta
    if args.fixed_s is not None:
        kw["fixed_s"] = args.fixed_s
    return LspConfig(**kw)


def _coef_csv(path, names, beta, intercept) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["feature", "coefficient"])
        wr.writerow(["(intercept)", repr(float(intercept))])
        for n, b in zip(names, beta):
            wr.writerow([n, repr(float(b))])


# -- weights ----------------------------------------------------------------


def cmd_weights_eval(args):
    g = _load_gamma(args.gamma)
    w = _load_weights(args)
    if args.empirical:
        score = phi_plugin(g, w, args.metric)
    else:
        score = phi_l1(g, w) if args.metric == "l1" else phi_pairwise(g, w)
    _emit(args, score.to_dict(), args.out)


def cmd_weights_synth(args):
    if args.gamma:
        g = _load_gamma(args.gamma)
    elif args.p is not None and args.n_active is not None:
        if not 0 <= args.n_active <= args.p:
            raise ConfigError("n-active must lie in [0, p]", field="n_active")
        g = np.zeros(args.p, dtype=bool)
        g[: args.n_active] = True
    else:
        raise ConfigError("give --gamma, or both --p and --n-active", field="gamma")
    names = read_dataset(args.data, args.response).names() if args.data else None
    if names is not None and len(names) != g.size:
        raise ConfigError(f"dataset has {len(names)} features, gamma {g.size}", field="data")
    w = generate_weights(g.size, g, args.phi, args.seed)
    path = _out_path(args, args.out, "weights.json")
    write_scores(path, w, names)
    realized = float(phi_l1(g, w)) if g.any() and not g.all() else None
    print(_dump({"out": str(path), "target_phi": args.phi, "realized_phi_l1": realized, "p": int(g.size)}))


def cmd_weights_ingest(args):
    data = read_dataset(args.data, args.response)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = ingest_scores(args.scores, data.names(), tuple(args.range),
                            fill_missing=args.fill_missing, by_order=args.by_order)
    path = _out_path(args, args.out, "weights.json")
    write_scores(path, res.weights, data.names())
    print(_dump({
        "out": str(path), "p": int(res.weights.size),
        "unmatched_features": res.unmatched_features, "unmatched_records": res.unmatched_records,
        "warnings": [str(c.message) for c in caught],
    }))


def cmd_weights_aggregate(args):
    vectors, names = [], None
    for path in args.inputs:
        recs = read_scores(path, tuple(args.range), integer=False)
        these = [r.name for r in recs]
        if names is None:
            names = these
        elif these != names:
            raise ConfigError(f"{path} lists different features", field="inputs")
        vectors.append([r.importance for r in recs])
    w = aggregate_weight_draws(vectors, args.mode)
    path = _out_path(args, args.out, "weights.json")
    write_scores(path, w, names)
    print(_dump({"out": str(path), "mode": args.mode, "draws": len(vectors), "weights": w.tolist()}))


# -- fitting ----------------------------------------------------------------


def cmd_fit_ss(args):
    data = read_dataset(args.data, args.response)
    centered, centering = standardize(data, scale=args.scale)
    w = _load_weights(args, data.names()) if args.weights else None
    spec = SsModelSpec(tau=args.tau, a_sigma=args.a_sigma, b_sigma=args.b_sigma, lsp=_lsp(args))
    post = run_chain(centered, w, spec, args.samples, args.burn_in, args.seed)
    out = post.to_dict(traces=args.traces)
    beta = centering.original_beta(post.bma_beta)
    out.update({
        "feature_names": data.names(), "coefficients": beta.tolist(),
        "intercept": centering.intercept(post.bma_beta), "seed": args.seed,
        "weighted": w is not None,
    })
    _emit(args, out, args.out, "ss_summary.json")


def cmd_fit_ssl(args):
    data = read_dataset(args.data, args.response)
    centered, centering = standardize(data, scale=args.scale)
    w = _load_weights(args, data.names()) if args.weights else None
    lsp = _lsp(args)
    if w is None:
        lsp = replace(lsp, pi0=1.0, fixed_eta=None)
    spec = SslSpec(lambda1=args.lambda1, grid_size=args.grid_size, lsp=lsp, s_mode=args.s_mode,
                   sigma2=args.sigma2, bic_form=args.bic_form,
                   lambda0_grid=tuple(args.lambda0_grid) if args.lambda0_grid else None)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonConvergenceWarning)
        path = run_path(centered, w, spec, args.seed)
    out = path.to_dict()
    final = path.final
    out.update({
        "feature_names": data.names(),
        "coefficients": centering.original_beta(final.beta).tolist(),
        "intercept": centering.intercept(final.beta),
        "warnings": [str(c.message) for c in caught],
    })
    if args.coef_out:
        _coef_csv(args.coef_out, data.names(), centering.original_beta(final.beta),
                  centering.intercept(final.beta))
    _emit(args, out, args.out, "ssl_path.json")


def _lasso_spec(args) -> LassoCvSpec:
    kw = {"folds": args.folds}
    if getattr(args, "eta_grid_cv", None):
        kw["eta_grid"] = tuple(args.eta_grid_cv)
    return LassoCvSpec(**kw)


def _fit_lasso_common(args, weighted):
    data = read_dataset(args.data, args.response)
    if args.scale:
        data, scaling = standardize(data, scale=True)
    else:
        scaling = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonConvergenceWarning)
        if weighted:
            res = two_stage_cv(data, _load_weights(args, data.names()), _lasso_spec(args), args.seed)
        else:
            res = lasso_cv(data, _lasso_spec(args), args.seed)
    out = res.to_dict()
    beta, intercept = res.beta, res.intercept
    if scaling is not None:
        beta = scaling.original_beta(res.beta)
        intercept = scaling.intercept(res.beta) + res.intercept
    out.update({"feature_names": data.names(), "coefficients": beta.tolist(), "intercept": intercept,
                "seed": args.seed, "warnings": sorted({str(c.message) for c in caught})})
    if args.coef_out:
        _coef_csv(args.coef_out, data.names(), beta, intercept)
    _emit(args, out, args.out, "llm_lasso.json" if weighted else "lasso.json")


def cmd_fit_lasso(args):
    _fit_lasso_common(args, weighted=False)


def cmd_fit_llm_lasso(args):
    _fit_lasso_common(args, weighted=True)


# -- simulation -------------------------------------------------------------


def _sim_config(path):
    from .simulation import DgpSpec, MethodSettings

    cfg = _load_json(path, "config")
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", field="config")
    if "dgp" not in cfg:
        raise ConfigError("config lacks a dgp block", field="dgp")
    dgp = DgpSpec.from_dict(cfg["dgp"])
    settings = MethodSettings.from_dict(cfg.get("settings", {}))
    return cfg, dgp, settings


def cmd_simulate(args):
    from .simulation import (
        DEFAULT_PHI_GRID,
        METHODS,
        inclusion_table,
        run_sweep,
        summarize,
        write_records,
        write_summary,
    )

    cfg, dgp, settings = _sim_config(args.config)
    known = {"dgp", "settings", "methods", "phi_grid", "replications", "seed", "inclusion"}
    extra = set(cfg) - known
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}", field=sorted(extra)[0])
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    methods = tuple(cfg.get("methods", METHODS))
    grid = tuple(cfg.get("phi_grid", DEFAULT_PHI_GRID))
    reps = int(args.replications or cfg.get("replications", 50))
    records = run_sweep(dgp, methods, grid, reps, seed, settings, workers=args.workers)
    rec_path = _out_path(args, args.records, "records.csv")
    sum_path = _out_path(args, args.summary, "summary.csv")
    write_records(rec_path, records)
    rows = summarize(records)
    write_summary(sum_path, rows)
    result = {"records": str(rec_path), "summary": str(sum_path), "n_records": len(records),
              "failures": sum(bool(r.error) for r in records), "seed": seed}
    if "inclusion" in cfg:
        inc = cfg["inclusion"]
        inc_dgp = dgp.from_dict(inc["dgp"]) if "dgp" in inc else dgp
        tables = inclusion_table(inc_dgp, tuple(inc.get("methods", methods)), float(inc.get("phi", 0.7)),
                                 int(inc.get("replications", reps)), seed, settings, args.workers)
        inc_path = _out_path(args, None, "inclusion.csv")
        write_inclusion(inc_path, tables)
        result["inclusion"] = str(inc_path)
    print(_dump(result))


def write_inclusion(path, tables) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["method", "gamma", "w", "mean_inclusion", "count"])
        for m, tb in tables.items():
            for g in (0, 1):
                for w in tb.weight_values:
                    wr.writerow([m, g, repr(float(w)), repr(tb.mean[(g, w)]), tb.count[(g, w)]])


def cmd_eta_sweep(args):
    from .simulation import eta_sweep

    cfg, dgp, settings = _sim_config(args.config)
    known = {"dgp", "settings", "methods", "phi", "eta_values", "replications", "seed"}
    extra = set(cfg) - known
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}", field=sorted(extra)[0])
    if "phi" not in cfg:
        raise ConfigError("eta-sweep config needs phi", field="phi")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    rows = eta_sweep(dgp, float(cfg["phi"]), cfg.get("eta_values", list(range(1, 11))),
                     int(args.replications or cfg.get("replications", 50)), seed, settings,
                     tuple(cfg.get("methods", ("lsp_ss", "lsp_ssl"))), args.workers)
    path = _out_path(args, args.out, "eta_sweep.csv")
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=["method", "eta", "mean_l1", "se_l1", "n"], lineterminator="\n")
        wr.writeheader()
        for r in rows:
            wr.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    print(_dump({"out": str(path), "rows": len(rows), "seed": seed}))


def cmd_report(args):
    from .plotting import plot_eta_sweep, plot_sweep
    from .simulation import read_summary

    src = Path(args.input)
    if not src.exists():
        raise ConfigError(f"{src} does not exist", field="in")
    with open(src, newline="") as fh:
        header = next(csv.reader(fh), [])
    out = _out_path(args, args.out, src.with_suffix(".svg").name)
    if "eta" in header and "target_phi" not in header:
        with open(src, newline="") as fh:
            rows = [dict(r, mean_l1=float(r["mean_l1"]),
                         se_l1=float(r["se_l1"]) if r["se_l1"] not in ("", "nan") else float("nan"))
                    for r in csv.DictReader(fh)]
        plot_eta_sweep(rows, out, title=args.title)
    else:
        plot_sweep(read_summary(src), out, metrics=tuple(args.metrics), title=args.title)
    print(_dump({"out": str(out)}))


# -- parser -----------------------------------------------------------------


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0 or the config value)")
    p.add_argument("--out-dir", default=None, help=f"directory for default outputs (env {ENV_OUTPUT_DIR})")


def _weights_opts(p, required=False):
    p.add_argument("--weights", required=required, help="scores JSON file")
    p.add_argument("--range", type=float, nargs=2, default=(1, 5), metavar=("LO", "HI"))
    p.add_argument("--fill-missing", action="store_true")
    p.add_argument("--by-order", action="store_true", help="match scores to features by position")


def _data_opts(p):
    p.add_argument("--data", required=True, help="CSV or columnar JSON dataset")
    p.add_argument("--response", default="y")
    p.add_argument("--scale", action="store_true", help="scale features to unit variance")


def _lsp_opts(p):
    p.add_argument("--a-s", type=float, default=1.0)
    p.add_argument("--b-s", type=float, default=None, help="default: number of features")
    p.add_argument("--pi0", type=float, default=0.5)
    p.add_argument("--eta-grid", type=float, nargs="+", default=None)
    p.add_argument("--fixed-eta", type=float, default=None)
    p.add_argument("--fixed-s", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lspvs", description="Weight-informed Bayesian variable selection.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    weights = sub.add_parser("weights", help="evaluate, synthesize, ingest or aggregate weights")
    wsub = weights.add_subparsers(dest="action", required=True, parser_class=_Parser)

    p = wsub.add_parser("eval")
    _common(p)
    p.add_argument("--gamma", required=True)
    _weights_opts(p, required=True)
    p.add_argument("--metric", choices=("l1", "pairwise"), default="l1")
    p.add_argument("--empirical", action="store_true", help="gamma is an estimate, not the truth")
    p.add_argument("--out")
    p.set_defaults(func=cmd_weights_eval)

    p = wsub.add_parser("synth")
    _common(p)
    p.add_argument("--gamma")
    p.add_argument("--p", type=int)
    p.add_argument("--n-active", type=int)
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--data", help="take feature names from this dataset")
    p.add_argument("--response", default="y")
    p.add_argument("--out")
    p.set_defaults(func=cmd_weights_synth)

    p = wsub.add_parser("ingest")
    _common(p)
    p.add_argument("--scores", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--response", default="y")
    p.add_argument("--range", type=float, nargs=2, default=(1, 5), metavar=("LO", "HI"))
    p.add_argument("--fill-missing", action="store_true")
    p.add_argument("--by-order", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_weights_ingest)

    p = wsub.add_parser("aggregate")
    _common(p)
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--mode", choices=("mean", "median"), default="mean")
    p.add_argument("--range", type=float, nargs=2, default=(1, 5), metavar=("LO", "HI"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_weights_aggregate)

    fit = sub.add_parser("fit", help="fit one method to a dataset")
    fsub = fit.add_subparsers(dest="action", required=True, parser_class=_Parser)

    p = fsub.add_parser("ss")
    _common(p)
    _data_opts(p)
    _weights_opts(p)
    _lsp_opts(p)
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--a-sigma", type=float, default=0.01)
    p.add_argument("--b-sigma", type=float, default=0.01)
    p.add_argument("--traces", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_ss)

    p = fsub.add_parser("ssl")
    _common(p)
    _data_opts(p)
    _weights_opts(p)
    _lsp_opts(p)
    p.add_argument("--lambda1", type=float, default=1.0)
    p.add_argument("--lambda0-grid", type=float, nargs="+", default=None)
    p.add_argument("--grid-size", type=int, default=20)
    p.add_argument("--s-mode", choices=("fixed", "update"), default="update")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--bic-form", choices=("known_variance", "profile"), default="known_variance")
    p.add_argument("--out")
    p.add_argument("--coef-out")
    p.set_defaults(func=cmd_fit_ssl)

    for name, func, weighted in (("lasso", cmd_fit_lasso, False), ("llm-lasso", cmd_fit_llm_lasso, True)):
        p = fsub.add_parser(name)
        _common(p)
        _data_opts(p)
        if weighted:
            _weights_opts(p, required=True)
            p.add_argument("--eta-grid-cv", type=float, nargs="+", default=None)
        p.add_argument("--folds", type=int, default=10)
        p.add_argument("--out")
        p.add_argument("--coef-out")
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", help="weight-quality sweep from a JSON config")
    _common(p)
    p.add_argument("--config", required=True)
    p.add_argument("--replications", type=int, default=None, help="override the config")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--records")
    p.add_argument("--summary")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eta-sweep", help="fixed-eta sensitivity from a JSON config")
    _common(p)
    p.add_argument("--config", required=True)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eta_sweep)

    p = sub.add_parser("report", help="SVG chart from a summary or eta-sweep CSV")
    _common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.add_argument("--metrics", nargs="+", choices=("f1", "l1"), default=["f1", "l1"])
    p.add_argument("--title")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.seed is None and args.func not in (cmd_simulate, cmd_eta_sweep):
            args.seed = 0
        args.func(args)
        return 0
    except LspError as exc:
        print(json.dumps({"error": exc.to_dict()}, default=str), file=sys.stderr)
        return 2 if isinstance(exc, UnknownCommand) else 1
    except OSError as exc:
        err = {"code": "io_error", "message": str(exc), "field": getattr(exc, "filename", None)}
        print(json.dumps({"error": err}, default=str), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
