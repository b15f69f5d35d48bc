"""Compiled inner loops: coordinate descent and the collapsed sampler.

Descent kernels work on centered data with a column-major ``X`` and update
``beta`` in place. Sampler kernels draw from a ``numpy.random.Generator``
passed in by the caller, so a stream gives the same chain whether it is
stepped from Python or run in one call.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def _lasso_sweep(X, r, beta, nrm, penalty, idx):
    n = X.shape[0]
    worst = 0.0
    for j in idx:
        if nrm[j] == 0.0:
            continue
        old = beta[j]
        z = X[:, j] @ r + nrm[j] * old
        new = _soft(z, penalty[j]) / nrm[j]
        if new != old:
            d = new - old
            for i in range(n):
                r[i] -= X[i, j] * d
            beta[j] = new
            change = nrm[j] * d * d
            worst = max(worst, change)
    return worst


@njit(cache=True)
def weighted_lasso_cd(X, y, beta, penalty, tol, max_iter):
    """Minimize 0.5 ||y - X b||^2 + sum_j penalty_j |b_j|. Returns (sweeps, converged).

    Alternates full sweeps with sweeps over the current nonzero set.
    Converged when a full sweep changes no coordinate's contribution to the
    fit, ``||x_j||^2 * delta_j^2``, by more than ``tol * y'y``.
    """
    n, p = X.shape
    r = y - X @ beta
    nrm = np.empty(p)
    for j in range(p):
        nrm[j] = X[:, j] @ X[:, j]
    scale = y @ y
    thresh = tol * (scale if scale > 0 else 1.0)
    everything = np.arange(p)
    it = 0
    while it < max_iter:
        worst = _lasso_sweep(X, r, beta, nrm, penalty, everything)
        it += 1
        if worst < thresh:
            return it, True
        active = np.flatnonzero(beta)
        while it < max_iter:
            worst = _lasso_sweep(X, r, beta, nrm, penalty, active)
            it += 1
            if worst < thresh:
                break
    return it, False


@njit(cache=True)
def weighted_lasso_path(X, y, factors, lambdas, tol, max_iter, saturation):
    """Warm-started solutions for each penalty level, in the order given.

    Once the residual sum of squares falls to ``saturation * y'y`` the fit
    is treated as saturated and later (smaller) penalties reuse it.
    """
    p = X.shape[1]
    out = np.zeros((lambdas.size, p))
    beta = np.zeros(p)
    ok = True
    yy = y @ y
    saturated = False
    for k in range(lambdas.size):
        if not saturated:
            _, conv = weighted_lasso_cd(X, y, beta, lambdas[k] * factors, tol, max_iter)
            ok = ok and conv
            r = y - X @ beta
            if r @ r <= saturation * yy:
                saturated = True
        out[k] = beta
    return out, ok


@njit(cache=True)
def ssl_effective_penalty(b, theta, lambda0, lambda1):
    """lambda1 p* + lambda0 (1 - p*), p* the slab responsibility at |b|."""
    ab = abs(b)
    log_slab = math.log(theta * lambda1) - lambda1 * ab
    log_spike = math.log((1.0 - theta) * lambda0) - lambda0 * ab
    d = log_spike - log_slab
    if d > 0:
        e = math.exp(-d)
        pstar = e / (1.0 + e)
    else:
        pstar = 1.0 / (1.0 + math.exp(d))
    return lambda1 * pstar + lambda0 * (1.0 - pstar)


@njit(cache=True)
def _ssl_sweep(X, r, beta, nrm, theta, lambda0, lambda1, sigma2, idx):
    n = X.shape[0]
    maxdiff = 0.0
    for j in idx:
        if nrm[j] == 0.0:
            continue
        old = beta[j]
        z = X[:, j] @ r + nrm[j] * old
        lam = ssl_effective_penalty(old, theta[j], lambda0, lambda1)
        new = _soft(z, sigma2 * lam) / nrm[j]
        if new != old:
            d = new - old
            for i in range(n):
                r[i] -= X[i, j] * d
            beta[j] = new
            maxdiff = max(maxdiff, abs(d))
    return maxdiff


@njit(cache=True)
def ssl_cd(X, y, beta, theta, lambda0, lambda1, sigma2, tol, max_iter):
    """Cyclic adaptive soft-thresholding for the Spike-and-Slab Lasso MAP.

    Each coordinate minimizes the objective with the concave penalty
    replaced by its tangent at the current value, so every update is a
    majorize-minimize step and the objective never increases. Full sweeps
    alternate with sweeps over the nonzero set; convergence is declared
    only when a full sweep moves no coefficient by ``tol`` or more.
    Returns (sweeps, converged).
    """
    n, p = X.shape
    r = y - X @ beta
    nrm = np.empty(p)
    for j in range(p):
        nrm[j] = X[:, j] @ X[:, j]
    everything = np.arange(p)
    it = 0
    while it < max_iter:
        maxdiff = _ssl_sweep(X, r, beta, nrm, theta, lambda0, lambda1, sigma2, everything)
        it += 1
        if maxdiff < tol:
            return it, True
        active = np.flatnonzero(beta)
        while it < max_iter:
            maxdiff = _ssl_sweep(X, r, beta, nrm, theta, lambda0, lambda1, sigma2, active)
            it += 1
            if maxdiff < tol:
                break
    return it, False


# -- collapsed spike-and-slab ------------------------------------------------

ADD, DELETE, SWAP = 0, 1, 2


@njit(cache=True)
def ss_log_ml(gram, xty, yty, idx, tau, shape, b, const):
    """log p(y | gamma) and the conditional posterior mean for active set ``idx``.

    Returns ``nan`` for the value if the regularized Gram matrix is not
    numerically positive definite.
    """
    k = idx.size
    if k == 0:
        return const - shape * math.log(b + 0.5 * yty), np.empty(0)
    L = np.zeros((k, k))
    for a in range(k):
        for c in range(a + 1):
            acc = gram[idx[a], idx[c]]
            if a == c:
                acc += 1.0 / tau
            for m in range(c):
                acc -= L[a, m] * L[c, m]
            if a == c:
                if acc <= 0.0:
                    return math.nan, np.zeros(k)
                L[a, a] = math.sqrt(acc)
            else:
                L[a, c] = acc / L[c, c]
    v = np.empty(k)
    logdet = 0.0
    for a in range(k):
        acc = xty[idx[a]]
        for m in range(a):
            acc -= L[a, m] * v[m]
        v[a] = acc / L[a, a]
        logdet += 2.0 * math.log(L[a, a])
    resid = yty - v @ v
    resid = max(resid, 0.0)
    beta = np.empty(k)
    for a in range(k - 1, -1, -1):
        acc = v[a]
        for m in range(a + 1, k):
            acc -= L[m, a] * beta[m]
        beta[a] = acc / L[a, a]
    value = const - 0.5 * k * math.log(tau) - 0.5 * logdet - shape * math.log(b + 0.5 * resid)
    return value, beta


@njit(cache=True)
def theta_logs(s, rel_k, log_rel_k):
    p = rel_k.size
    lt = np.empty(p)
    l1t = np.empty(p)
    ls = math.log(s)
    for j in range(p):
        lt[j] = ls + log_rel_k[j]
        l1t[j] = math.log1p(-s * rel_k[j])
    return lt, l1t


@njit(cache=True)
def move_distribution(size, p, base):
    probs = np.zeros(3)
    avail = np.array([size < p, size > 0, 0 < size < p], dtype=np.float64)
    total = 0.0
    for m in range(3):
        probs[m] = base[m] * avail[m]
        total += probs[m]
    if total == 0.0:  # only possible when SWAP is the sole move type and p <= 1
        for m in range(3):
            probs[m] = avail[m]
        total = avail.sum()
    return probs / total


@njit(cache=True)
def ads_move(gamma, log_ml, lt, l1t, base, gram, xty, yty, tau, shape, b, const, rng):
    """One add/delete/swap proposal; ``gamma`` is flipped in place if accepted.

    Returns (move, accepted, log_ml of the current model, conditional mean
    of the current model's coefficients, or an empty array if unchanged).
    """
    p = gamma.size
    size = 0
    for j in range(p):
        size += gamma[j]
    probs = move_distribution(size, p, base)
    u = rng.random()
    if u < probs[0]:
        move = ADD
    elif u < probs[0] + probs[1]:
        move = DELETE
    else:
        move = SWAP
    ones = np.empty(size, dtype=np.int64)
    zeros = np.empty(p - size, dtype=np.int64)
    a = 0
    z = 0
    for j in range(p):
        if gamma[j]:
            ones[a] = j
            a += 1
        else:
            zeros[z] = j
            z += 1
    i = -1
    j = -1
    if move == ADD:
        j = zeros[rng.integers(0, zeros.size)]
        d_prior = lt[j] - l1t[j]
        back = move_distribution(size + 1, p, base)[DELETE] / (size + 1)
        fwd = probs[ADD] / (p - size)
    elif move == DELETE:
        i = ones[rng.integers(0, ones.size)]
        d_prior = l1t[i] - lt[i]
        back = move_distribution(size - 1, p, base)[ADD] / (p - size + 1)
        fwd = probs[DELETE] / size
    else:
        i = ones[rng.integers(0, ones.size)]
        j = zeros[rng.integers(0, zeros.size)]
        d_prior = (lt[j] - l1t[j]) - (lt[i] - l1t[i])
        back = 1.0
        fwd = 1.0
    if i >= 0:
        gamma[i] = False
    if j >= 0:
        gamma[j] = True
    idx = np.flatnonzero(gamma)
    new_ml, beta = ss_log_ml(gram, xty, yty, idx, tau, shape, b, const)
    if math.isnan(new_ml):
        raise FloatingPointError("regularized Gram matrix is not positive definite")
    log_ratio = new_ml - log_ml + d_prior + math.log(back / fwd)
    if log_ratio >= 0 or math.log(rng.random()) < log_ratio:
        return move, True, new_ml, beta
    if i >= 0:
        gamma[i] = True
    if j >= 0:
        gamma[j] = False
    return move, False, log_ml, np.empty(0)


@njit(cache=True)
def log_prior_by_eta(gamma, s, rel, log_rel, rel_max):
    """log p(gamma | s, eta_k) for each row of ``rel``; -inf where theta >= 1."""
    K, p = rel.shape
    out = np.empty(K)
    ls = math.log(s)
    for k in range(K):
        if s * rel_max[k] >= 1.0:
            out[k] = -math.inf
            continue
        acc = 0.0
        for j in range(p):
            if gamma[j]:
                acc += ls + log_rel[k, j]
            else:
                acc += math.log1p(-s * rel[k, j])
        out[k] = acc
    return out


@njit(cache=True)
def eta_probs(gamma, s, log_eta_prior, rel, log_rel, rel_max):
    lp = log_eta_prior + log_prior_by_eta(gamma, s, rel, log_rel, rel_max)
    lp = lp - lp.max()
    prob = np.exp(lp)
    return prob / prob.sum()


@njit(cache=True)
def eta_draw(gamma, s, log_eta_prior, rel, log_rel, rel_max, rng):
    """Exact draw from the discrete conditional of eta; consumes one uniform."""
    cum = np.cumsum(eta_probs(gamma, s, log_eta_prior, rel, log_rel, rel_max))
    target = rng.random() * cum[-1]
    k = np.searchsorted(cum, target, side="right")
    return min(k, cum.size - 1)


@njit(cache=True)
def log_s_ratio(s_new, s_old, gamma, rel_k, a_s, b_s):
    # Beta(a, b) density times the logit Jacobian s (1 - s), times p(gamma | s, eta)
    size = 0
    acc = 0.0
    for j in range(gamma.size):
        if gamma[j]:
            size += 1
        else:
            acc += math.log1p(-s_new * rel_k[j]) - math.log1p(-s_old * rel_k[j])
    return (
        (a_s + size) * (math.log(s_new) - math.log(s_old))
        + b_s * (math.log1p(-s_new) - math.log1p(-s_old))
        + acc
    )


@njit(cache=True)
def s_draw(s, gamma, rel_k, rel_max_k, a_s, b_s, step, rng):
    """Random-walk Metropolis on logit(s); consumes one normal and one uniform."""
    x = math.log(s) - math.log1p(-s) + step * rng.standard_normal()
    if x >= 0:
        s_new = 1.0 / (1.0 + math.exp(-x))
    else:
        e = math.exp(x)
        s_new = e / (1.0 + e)
    u = rng.random()
    if not (0.0 < s_new < 1.0) or s_new * rel_max_k >= 1.0:
        return s
    r = log_s_ratio(s_new, s, gamma, rel_k, a_s, b_s)
    if r >= 0 or math.log(u) < r:
        return s_new
    return s


@njit(cache=True)
def ads_chain(gamma, s, k, n_samples, burn_in, base, gram, xty, yty, tau, shape, b, const,
              rel, log_rel, rel_max, log_eta_prior, fixed_eta, fixed_s, a_s, b_s, step,
              record_models, rng):
    """Full sampler loop. ``gamma`` is the start and is updated in place."""
    p = gamma.size
    kept = n_samples - burn_in
    incl = np.zeros(p, dtype=np.int64)
    bma = np.zeros(p)
    s_trace = np.empty(kept)
    k_trace = np.empty(kept, dtype=np.int64)
    models = np.zeros((kept if record_models else 0, p), dtype=np.bool_)
    accepted = np.zeros(3, dtype=np.int64)
    proposed = np.zeros(3, dtype=np.int64)
    idx = np.flatnonzero(gamma)
    log_ml, bg = ss_log_ml(gram, xty, yty, idx, tau, shape, b, const)
    if math.isnan(log_ml):
        raise FloatingPointError("regularized Gram matrix is not positive definite")
    beta = np.zeros(p)
    beta[idx] = bg
    lt, l1t = theta_logs(s, rel[k], log_rel[k])
    for it in range(n_samples):
        move, ok, log_ml, bg = ads_move(gamma, log_ml, lt, l1t, base, gram, xty, yty,
                                        tau, shape, b, const, rng)
        proposed[move] += 1
        if ok:
            accepted[move] += 1
            beta[:] = 0.0
            beta[np.flatnonzero(gamma)] = bg
        changed = False
        if not fixed_eta:
            k_new = eta_draw(gamma, s, log_eta_prior, rel, log_rel, rel_max, rng)
            if k_new != k:
                k = k_new
                changed = True
        if not fixed_s:
            s_new = s_draw(s, gamma, rel[k], rel_max[k], a_s, b_s, step, rng)
            if s_new != s:
                s = s_new
                changed = True
        if changed:
            lt, l1t = theta_logs(s, rel[k], log_rel[k])
        if it >= burn_in:
            t = it - burn_in
            s_trace[t] = s
            k_trace[t] = k
            for j in range(p):
                if gamma[j]:
                    incl[j] += 1
            bma += beta
            if record_models:
                models[t] = gamma
    return incl, bma, s_trace, k_trace, accepted, proposed, models, s, k
