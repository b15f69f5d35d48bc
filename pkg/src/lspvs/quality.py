"""Agreement between importance weights and an inclusion vector."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import as_gamma, as_weights
from .errors import DegenerateWeights, DimensionMismatch, PTooSmall

MetricKind = Literal["l1", "pairwise"]


@dataclass(frozen=True)
class AgreementScore:
    value: float
    metric_kind: str
    empirical: bool = False

    def __float__(self):
        return self.value

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "metric": self.metric_kind,
            "kind": "empirical_alignment" if self.empirical else "ground_truth_agreement",
        }


def _check(gamma, w):
    g = as_gamma(gamma)
    w = as_weights(w)
    if g.shape != w.shape:
        raise DimensionMismatch(
            f"gamma has length {g.size} but w has length {w.size}", field="w",
        )
    return g, w


def minmax(w) -> np.ndarray:
    w = as_weights(w)
    lo, hi = w.min(), w.max()
    if hi <= lo:
        raise DegenerateWeights("weights are constant; min-max scaling undefined", field="w")
    return (w - lo) / (hi - lo)


def phi_l1(gamma, w) -> AgreementScore:
    """One minus the mean absolute gap between min-max scaled weights and gamma."""
    g, w = _check(gamma, w)
    dist = np.abs(minmax(w) - g).sum()
    value = 1.0 - dist / g.size
    return AgreementScore(float(min(1.0, max(0.0, value))), "l1")


def phi_pairwise(gamma, w) -> AgreementScore:
    """Fraction of ordered pairs on which the strict orderings of gamma and w agree.

    Ties in ``w`` count as "not greater" in both directions, so a tie across
    an active/inactive pair is one disagreement.
    """
    g, w = _check(gamma, w)
    p = g.size
    if p < 2:
        raise PTooSmall("pairwise agreement needs p >= 2", field="gamma")
    if g.all() or not g.any():
        warnings.warn(
            "gamma is constant; pairwise agreement only counts spurious orderings in w",
            stacklevel=2,
        )
    # sum_{i!=j} |1(g_i>g_j) - 1(w_i>w_j)| without forming p x p matrices.
    # Pairs (i, j) with g_i > g_j: disagreement unless w_i > w_j.
    # Pairs with g_i <= g_j: disagreement when w_i > w_j.
    order = np.sort(w)
    # number of w values strictly less than each w_i
    n_less = np.searchsorted(order, w, side="left")
    total_greater_pairs = n_less.sum()  # # of ordered pairs with w_i > w_j
    w_act = np.sort(w[g])
    w_ina = np.sort(w[~g])
    # pairs i active, j inactive with w_i > w_j
    concordant = np.searchsorted(w_ina, w_act, side="left").sum()
    n_cross = w_act.size * w_ina.size
    disagreements = (n_cross - concordant) + (total_greater_pairs - concordant)
    value = 1.0 - disagreements / (p * (p - 1))
    return AgreementScore(float(value), "pairwise")


def phi_plugin(gamma_hat, w, metric_kind: MetricKind = "l1") -> AgreementScore:
    """Agreement of ``w`` with an estimated inclusion vector.

    Interpreted as empirical alignment between the weights and the data, not
    as agreement with the true support.
    """
    fn = {"l1": phi_l1, "pairwise": phi_pairwise}.get(metric_kind)
    if fn is None:
        raise ValueError(f"unknown metric {metric_kind!r}")
    score = fn(gamma_hat, w)
    return AgreementScore(score.value, score.metric_kind, empirical=True)
