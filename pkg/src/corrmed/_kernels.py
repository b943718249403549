"""Compiled inner loops shared by the three samplers.

Labels are stored as 1..4 (1 = active); arrays indexed by component use
``label - 1``.  Mediator matrices are passed column-major so that a
mediator's column is contiguous.
"""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def permutation(p, rng):
    order = np.arange(p)
    for i in range(p - 1, 0, -1):
        j = int(rng.random() * (i + 1))
        order[i], order[j] = order[j], order[i]
    return order


@numba.njit(cache=True)
def categorical(logw, rng):
    m = -np.inf
    for k in range(logw.shape[0]):
        if logw[k] > m:
            m = logw[k]
    total = 0.0
    for k in range(logw.shape[0]):
        total += math.exp(logw[k] - m)
    u = rng.random() * total
    acc = 0.0
    last = 0
    for k in range(logw.shape[0]):
        if logw[k] == -np.inf:
            continue
        acc += math.exp(logw[k] - m)
        last = k
        if u < acc:
            return k
    return last


@numba.njit(cache=True)
def site_log_marginals(w1, w2, W11, W22, V1inv, logdet_V1, v2, v3, out):
    """Collapsed log marginal of one mediator's data under each component.

    Relative to the all-zero effect pair; component 4 is therefore 0.
    """
    p00 = W11 + V1inv[0, 0]
    p01 = V1inv[0, 1]
    p11 = W22 + V1inv[1, 1]
    det = p00 * p11 - p01 * p01
    quad = (p11 * w1 * w1 - 2.0 * p01 * w1 * w2 + p00 * w2 * w2) / det
    out[0] = -0.5 * (logdet_V1 + math.log(det)) + 0.5 * quad
    out[1] = -0.5 * math.log1p(W11 * v2) + 0.5 * w1 * w1 / (W11 + 1.0 / v2)
    out[2] = -0.5 * math.log1p(W22 * v3) + 0.5 * w2 * w2 / (W22 + 1.0 / v3)
    out[3] = 0.0


@numba.njit(cache=True)
def draw_pair(k, w1, w2, W11, W22, V1inv, v2, v3, rng):
    """(beta_m, alpha_a) from its Gaussian conditional under component k (0-based)."""
    if k == 0:
        p00 = W11 + V1inv[0, 0]
        p01 = V1inv[0, 1]
        p11 = W22 + V1inv[1, 1]
        l00 = math.sqrt(p00)
        l10 = p01 / l00
        l11 = math.sqrt(p11 - l10 * l10)
        # mean + L^-T z, mean = P^-1 w
        det = p00 * p11 - p01 * p01
        m0 = (p11 * w1 - p01 * w2) / det
        m1 = (p00 * w2 - p01 * w1) / det
        x1 = rng.standard_normal() / l11
        x0 = (rng.standard_normal() - l10 * x1) / l00
        return m0 + x0, m1 + x1
    if k == 1:
        prec = W11 + 1.0 / v2
        return w1 / prec + rng.standard_normal() / math.sqrt(prec), 0.0
    if k == 2:
        prec = W22 + 1.0 / v3
        return 0.0, w2 / prec + rng.standard_normal() / math.sqrt(prec)
    return 0.0, 0.0


@numba.njit(cache=True)
def site_sweep(gamma, beta_m, alpha_a, resid, M, mtm_diag, w2_all, W22, inv_se2,
               V1inv, logdet_V1, v2, v3, log_base, indptr, indices, theta1, rng):
    """One random-order pass of collapsed label + effect-pair updates.

    ``resid`` is Y minus the full linear predictor and is kept current.
    Label log-prior for site j is ``log_base[j] + theta1[k] * #{neighbors
    labelled k}``.
    """
    p = gamma.shape[0]
    n = resid.shape[0]
    order = permutation(p, rng)
    lm = np.empty(4)
    for t in range(p):
        j = order[t]
        dot = 0.0
        for i in range(n):
            dot += M[i, j] * resid[i]
        W11 = inv_se2 * mtm_diag[j]
        w1 = inv_se2 * dot + W11 * beta_m[j]
        w2 = w2_all[j]
        site_log_marginals(w1, w2, W11, W22, V1inv, logdet_V1, v2, v3, lm)
        for k in range(4):
            lm[k] += log_base[j, k]
        for e in range(indptr[j], indptr[j + 1]):
            g = gamma[indices[e]] - 1
            lm[g] += theta1[g]
        k = categorical(lm, rng)
        b, a = draw_pair(k, w1, w2, W11, W22, V1inv, v2, v3, rng)
        delta = b - beta_m[j]
        if delta != 0.0:
            for i in range(n):
                resid[i] -= M[i, j] * delta
        beta_m[j] = b
        alpha_a[j] = a
        gamma[j] = k + 1


@numba.njit(cache=True)
def _forward(L, b):
    m = b.shape[0]
    x = np.empty(m)
    for i in range(m):
        s = b[i]
        for r in range(i):
            s -= L[i, r] * x[r]
        x[i] = s / L[i, i]
    return x


@numba.njit(cache=True)
def _backward_t(L, b):
    # solve L^T x = b
    m = b.shape[0]
    x = np.empty(m)
    for i in range(m - 1, -1, -1):
        s = b[i]
        for r in range(i + 1, m):
            s -= L[r, i] * x[r]
        x[i] = s / L[i, i]
    return x


@numba.njit(cache=True)
def cluster_log_marginals(mem, beta_m, resid, M, MtM, w2_all, W22, inv_se2,
                          V1inv, logdet_V1, v2, v3, out):
    """Joint collapsed log marginal of a cluster's data under each component.

    The cluster's effect pairs are integrated out together, so outcome
    correlations between members are accounted for.  Returns the Cholesky
    factors and linear terms needed to draw the pairs afterwards.
    """
    c = mem.shape[0]
    n = resid.shape[0]
    hb = np.empty(c)
    for a in range(c):
        ja = mem[a]
        s = 0.0
        for i in range(n):
            s += M[i, ja] * resid[i]
        for b in range(c):
            s += MtM[ja, mem[b]] * beta_m[mem[b]]
        hb[a] = inv_se2 * s

    # component 2: beta block only
    P2 = np.empty((c, c))
    for a in range(c):
        for b in range(c):
            P2[a, b] = inv_se2 * MtM[mem[a], mem[b]]
        P2[a, a] += 1.0 / v2
    L2 = np.linalg.cholesky(P2)
    y2 = _forward(L2, hb)
    ld2 = 0.0
    for a in range(c):
        ld2 += math.log(L2[a, a])
    out[1] = -0.5 * c * math.log(v2) - ld2 + 0.5 * np.dot(y2, y2)

    # component 1: joint (beta block, alpha block)
    P1 = np.zeros((2 * c, 2 * c))
    h1 = np.empty(2 * c)
    for a in range(c):
        for b in range(c):
            P1[a, b] = inv_se2 * MtM[mem[a], mem[b]]
        P1[a, a] += V1inv[0, 0]
        P1[a, c + a] = V1inv[0, 1]
        P1[c + a, a] = V1inv[0, 1]
        P1[c + a, c + a] = W22 + V1inv[1, 1]
        h1[a] = hb[a]
        h1[c + a] = w2_all[mem[a]]
    L1 = np.linalg.cholesky(P1)
    y1 = _forward(L1, h1)
    ld1 = 0.0
    for a in range(2 * c):
        ld1 += math.log(L1[a, a])
    out[0] = -0.5 * c * logdet_V1 - ld1 + 0.5 * np.dot(y1, y1)

    # component 3: alpha entries are independent given sigma_g2
    s3 = 0.0
    for a in range(c):
        w2 = w2_all[mem[a]]
        s3 += -0.5 * math.log1p(W22 * v3) + 0.5 * w2 * w2 / (W22 + 1.0 / v3)
    out[2] = s3
    out[3] = 0.0
    return L1, y1, L2, y2


@numba.njit(cache=True)
def cluster_update(mem, gamma, beta_m, alpha_a, resid, M, MtM, w2_all, W22, inv_se2,
                   V1inv, logdet_V1, v2, v3, log_prior, allowed, rng):
    """Draw a common label for ``mem`` and then its effect pairs jointly.

    ``log_prior[k]`` is the cluster's summed field term for component k;
    components with ``allowed[k]`` False are excluded.
    """
    c = mem.shape[0]
    n = resid.shape[0]
    lm = np.empty(4)
    L1, y1, L2, y2 = cluster_log_marginals(mem, beta_m, resid, M, MtM, w2_all, W22, inv_se2,
                                           V1inv, logdet_V1, v2, v3, lm)
    for k in range(4):
        lm[k] = lm[k] + log_prior[k] if allowed[k] else -np.inf
    k = categorical(lm, rng)
    new_b = np.zeros(c)
    new_a = np.zeros(c)
    if k == 0:
        z = np.empty(2 * c)
        for a in range(2 * c):
            z[a] = y1[a] + rng.standard_normal()
        x = _backward_t(L1, z)
        for a in range(c):
            new_b[a] = x[a]
            new_a[a] = x[c + a]
    elif k == 1:
        z = np.empty(c)
        for a in range(c):
            z[a] = y2[a] + rng.standard_normal()
        new_b = _backward_t(L2, z)
    elif k == 2:
        prec = W22 + 1.0 / v3
        for a in range(c):
            new_a[a] = w2_all[mem[a]] / prec + rng.standard_normal() / math.sqrt(prec)
    for a in range(c):
        j = mem[a]
        delta = new_b[a] - beta_m[j]
        if delta != 0.0:
            for i in range(n):
                resid[i] -= M[i, j] * delta
        beta_m[j] = new_b[a]
        alpha_a[j] = new_a[a]
        gamma[j] = k + 1
    return k
