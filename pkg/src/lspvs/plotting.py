"""SVG line charts of sweep summaries: mean with a +/- 1 SE band per method."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .simulation import LABELS, METHODS, curves

# fixed ids and no timestamp, so equal inputs give byte-identical files
_RC = {
    "svg.hashsalt": "lspvs",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
}
_METRIC_LABEL = {"f1": "F1 score", "l1": "l1 error"}
_COLORS = {
    "lsp_ss": "#1f77b4", "ss": "#1f77b4", "lsp_ssl": "#d62728", "ssl": "#d62728",
    "llm_lasso": "#2ca02c", "lasso": "#2ca02c",
}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def plot_sweep(rows, out_path, metrics=("f1", "l1"), title: str | None = None) -> None:
    """One panel per metric, one curve per method; baselines are dashed."""
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, len(metrics), figsize=(4.2 * len(metrics), 3.4), squeeze=False)
        for ax, metric in zip(axes[0], metrics):
            data = curves(rows, metric)
            for m in [m for m in METHODS if m in data] + sorted(set(data) - set(METHODS)):
                phi, mean, se = data[m]
                style = "--" if not m.startswith(("lsp", "llm")) else "-"
                color = _COLORS.get(m, "0.3")
                ax.plot(phi, mean, style, color=color, lw=1.4, label=LABELS.get(m, m),
                        gid=f"curve-{metric}-{m}")
                band = np.nan_to_num(se)
                ax.fill_between(phi, mean - band, mean + band, color=color, alpha=0.15, lw=0)
            ax.set_xlabel("weight quality (phi_l1)")
            ax.set_ylabel(_METRIC_LABEL.get(metric, metric))
        axes[0][0].legend(frameon=False, fontsize=7)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        _save(fig, out_path)


def plot_eta_sweep(rows, out_path, title: str | None = None) -> None:
    """Mean l1 error against fixed eta; the hyperprior result is a horizontal line."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.6, 3.4))
        for m in sorted({r["method"] for r in rows}, key=lambda m: METHODS.index(m)):
            fixed = sorted((float(r["eta"]), r["mean_l1"], r["se_l1"])
                           for r in rows if r["method"] == m and r["eta"] != "prior")
            prior = [r["mean_l1"] for r in rows if r["method"] == m and r["eta"] == "prior"]
            color = _COLORS.get(m, "0.3")
            if fixed:
                eta, mean, se = (np.array(v) for v in zip(*fixed))
                ax.errorbar(eta, mean, yerr=np.nan_to_num(se), fmt="o-", ms=3, lw=1.2,
                            color=color, capsize=2, label=f"{LABELS.get(m, m)}, fixed eta")
            if prior:
                ax.axhline(prior[0], color=color, ls="--", lw=1, label=f"{LABELS.get(m, m)}, hyperprior",
                           gid=f"prior-{m}")
        ax.set_xlabel("eta")
        ax.set_ylabel("l1 error")
        ax.legend(frameon=False, fontsize=7)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, out_path)
