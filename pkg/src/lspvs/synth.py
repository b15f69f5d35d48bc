"""Synthetic integer weights in {1..5} calibrated to a target l1 agreement.

Each feature deviates from its ideal weight (5 if active, 1 if inactive) by
``d`` in {0..4}, with P(D=d) proportional to r**d. The ratio r is chosen so
that E[D] = 4 (1 - phi), which makes the l1 agreement of the result equal
to phi up to rounding of the class counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RngSeed, as_gamma, make_rng
from .errors import DegenerateWeights, OutOfRange

N_CLASSES = 5
MAX_WEIGHT = 5

#: 0.50, 0.60, 0.70, 0.75, then 0.80 to 1.00 in steps of 0.01.
DEFAULT_PHI_GRID: tuple[float, ...] = (0.50, 0.60, 0.70, 0.75) + tuple(
    round(0.80 + 0.01 * k, 2) for k in range(21)
)


def _check_phi(phi: float) -> float:
    phi = float(phi)
    if not (0.5 <= phi <= 1.0):
        raise OutOfRange(f"target phi {phi} outside [0.5, 1]", field="phi", value=phi)
    return phi


def ratio_polynomial(r: float, mu: float) -> float:
    return (4 - mu) * r**4 + (3 - mu) * r**3 + (2 - mu) * r**2 + (1 - mu) * r - mu


def solve_ratio(target_phi: float, tol: float = 1e-14) -> float:
    """Root in [0, 1] of the expected-deviation quartic, by bisection.

    The polynomial is -mu at r=0 and 10 - 5 mu at r=1, so it brackets a root
    for mu in [0, 2], and E[D] is increasing in r.
    """
    phi = _check_phi(target_phi)
    mu = 4.0 * (1.0 - phi)
    if mu == 0.0:
        return 0.0
    if mu == 2.0:
        return 1.0
    lo, hi = 0.0, 1.0
    # run past ``tol`` down to float resolution; the residual check is 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if ratio_polynomial(mid, mu) < 0:
            lo = mid
        else:
            hi = mid
    if hi - lo > tol:
        raise ArithmeticError("bisection failed to converge")
    return lo if abs(ratio_polynomial(lo, mu)) <= abs(ratio_polynomial(hi, mu)) else hi


@dataclass(frozen=True)
class DeviationModel:
    target_phi: float
    mu: float
    ratio_r: float
    pmf: tuple[float, ...]

    @classmethod
    def for_phi(cls, target_phi: float) -> DeviationModel:
        phi = _check_phi(target_phi)
        r = solve_ratio(phi)
        powers = r ** np.arange(N_CLASSES)
        pmf = powers / powers.sum()
        return cls(phi, 4.0 * (1.0 - phi), r, tuple(float(v) for v in pmf))

    def expected_deviation(self) -> float:
        return float(np.arange(N_CLASSES) @ np.asarray(self.pmf))

    def class_counts(self, size: int) -> np.ndarray:
        """Largest-remainder rounding of ``size * pmf``; counts sum to ``size``."""
        raw = size * np.asarray(self.pmf)
        counts = np.floor(raw).astype(int)
        short = size - counts.sum()
        if short:
            # stable: ties go to the smaller deviation
            order = np.argsort(-(raw - counts), kind="stable")
            counts[order[:short]] += 1
        return counts


def generate_weights(p: int, active, target_phi: float, seed) -> np.ndarray:
    """Integer weights whose l1 agreement with ``active`` approximates ``target_phi``.

    Active features get weight 5 - d and inactive features 1 + d. Which
    features of a group receive which deviation is a uniform random
    assignment drawn from ``seed``.
    """
    g = as_gamma(active, "active")
    if g.size != p:
        raise OutOfRange(f"active has length {g.size}, expected p={p}", field="active")
    model = DeviationModel.for_phi(target_phi)
    rng = make_rng(seed)
    w = np.empty(p)
    for is_active in (True, False):
        idx = np.flatnonzero(g == is_active)
        if idx.size == 0:
            continue
        dev = np.repeat(np.arange(N_CLASSES), model.class_counts(idx.size))
        idx = rng.permutation(idx)
        w[idx] = (MAX_WEIGHT - dev) if is_active else (1 + dev)
    if w.max() == w.min():
        raise DegenerateWeights("generated weights are constant", field="active")
    return w


def generate_grid(p: int, active, phi_grid=DEFAULT_PHI_GRID, seed=0) -> list[np.ndarray]:
    """One weight vector per grid value, each from its own sub-stream."""
    base = seed if isinstance(seed, RngSeed) else RngSeed(int(seed))
    return [generate_weights(p, active, phi, base.child(k)) for k, phi in enumerate(phi_grid)]
