import itertools
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lspvs.core import RegressionData

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def brute_phi_l1(gamma, w):
    w = [float(v) for v in w]
    lo, hi = min(w), max(w)
    total = 0.0
    for g, v in zip(gamma, w):
        total += abs((v - lo) / (hi - lo) - g)
    return 1.0 - total / len(w)


def brute_phi_pairwise(gamma, w):
    p = len(w)
    bad = 0
    for i in range(p):
        for j in range(p):
            if i != j:
                bad += abs(int(gamma[i] > gamma[j]) - int(w[i] > w[j]))
    return 1.0 - bad / (p * (p - 1))


def all_gammas(p):
    return [np.array(g, dtype=bool) for g in itertools.product((0, 1), repeat=p)]


def make_data(n, p, beta=None, seed=0, noise=1.0, center=True):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p) if beta is None else np.asarray(beta, dtype=float)
    y = X @ beta + noise * rng.standard_normal(n)
    if center:
        X = X - X.mean(axis=0)
        y = y - y.mean()
    return RegressionData(y, X)


@pytest.fixture
def small_data():
    return make_data(30, 6, beta=[2.0, -1.5, 0, 0, 1.0, 0], seed=1)


def log_binom_prior(gamma, theta):
    return sum(math.log(t) if g else math.log1p(-t) for g, t in zip(gamma, theta))
