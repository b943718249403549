"""Moment checks of every full conditional at frozen states.

Each check draws repeatedly from one conditional with everything else held
fixed and compares the sample mean and variance with the closed form written
out here from the model.  Scores are in Monte Carlo standard errors.
Inverse-gamma draws are checked through the mean of x and the mean and
variance of 1/x (gamma distributed), which keeps every score's own
variance finite.
"""

import copy
import math
from dataclasses import dataclass

import numpy as np

import oracles
from corrmed import corrs, model
from corrmed.model import (
    ChainState,
    Hyperparameters,
    MediationDataset,
    MediatorState,
    MixtureState,
    ModelData,
    OutcomeState,
)


@dataclass
class Check:
    name: str
    z: float


def moment_z(x, mean, var):
    """Largest of the mean and variance discrepancies in standard errors."""
    x = np.asarray(x, dtype=float)
    n = x.size
    zm = abs(x.mean() - mean) / math.sqrt(var / n)
    mu4 = np.mean((x - mean) ** 4)
    s2 = np.mean((x - mean) ** 2)
    zv = abs(s2 - var) / math.sqrt(max(mu4 - var**2, 1e-300) / n)
    return max(zm, zv)


def ig_z(x, shape, rate):
    x = np.asarray(x, dtype=float)
    z = moment_z(1.0 / x, shape / rate, shape / rate**2)
    if shape > 2:
        var = rate**2 / ((shape - 1) ** 2 * (shape - 2))
        z = max(z, abs(x.mean() - rate / (shape - 1)) / math.sqrt(var / x.size))
    return z


def frozen_problem(seed=3, n=40, p=20, q=2):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal(n)
    C = rng.standard_normal((n, q))
    M = np.outer(A, rng.normal(0, 0.5, p)) + rng.standard_normal((n, p))
    Y = M[:, :3] @ np.array([0.6, -0.4, 0.3]) + 0.5 * A + C @ np.array([0.2, -0.1]) + rng.standard_normal(n)
    data = ModelData(MediationDataset(A, M, Y, C))
    gamma = np.array([1] * 10 + [2] * 4 + [3] * 3 + [4] * 3, dtype=np.int64)
    rng.shuffle(gamma)
    beta = np.where(gamma <= 2, rng.normal(0, 0.6, p), 0.0)
    alpha = np.where((gamma == 1) | (gamma == 3), rng.normal(0, 0.6, p), 0.0)
    state = ChainState(
        outcome=OutcomeState(beta, 0.4, np.array([0.15, -0.05]), 1.3, 0.8),
        mediator=MediatorState(alpha, rng.normal(0, 0.2, (p, q)), 0.9),
        mixture=MixtureState(gamma, np.array([[0.5, 0.2], [0.2, 0.5]]), 0.45, 0.6),
    )
    state.resid = data.residual(state)
    return data, state


def _resid(data, st):
    o = st.outcome
    return data.Y - data.M @ o.beta_m - data.A * o.beta_a - data.C @ o.beta_c


def check_effect_pairs(data, state, rng, draws):
    out = []
    o, md, mx = state.outcome, state.mediator, state.mixture
    for label in (1, 2, 3):
        j = int(np.flatnonzero(mx.gamma == label)[0])
        m = data.M[:, j]
        r = _resid(data, state) + m * o.beta_m[j]
        w = np.array([m @ r / o.sigma_e2, (m - data.C @ md.alpha_c[j]) @ data.A / md.sigma_g2])
        W = np.diag([m @ m / o.sigma_e2, data.A @ data.A / md.sigma_g2])
        st = copy.deepcopy(state)
        x = np.array([model.update_effect_pair(j, label, st, data, rng) for _ in range(draws)])
        if label == 1:
            cov = np.linalg.inv(W + np.linalg.inv(mx.V1))
            mean = cov @ w
            zs = [moment_z(x[:, i], mean[i], cov[i, i]) for i in range(2)]
        else:
            i = label - 2
            prior = mx.v2 if label == 2 else mx.v3
            var = 1.0 / (W[i, i] + 1.0 / prior)
            zs = [moment_z(x[:, i], var * w[i], var)]
            if np.any(x[:, 1 - i] != 0):
                zs.append(math.inf)
        out.append(Check(f"effect_pair[label={label}]", max(zs)))
    return out


def check_mixture_covariances(data, state, hyper, rng, draws):
    mx = state.mixture
    st = copy.deepcopy(state)
    sel = mx.gamma == 1
    P = np.column_stack([state.outcome.beta_m[sel], state.mediator.alpha_a[sel]])
    Psi = np.asarray(hyper.psi0) + P.T @ P
    nu = hyper.df + sel.sum()
    d = 2
    x = np.array([model.update_V1(st, hyper, rng) for _ in range(draws)])
    zs = []
    for i, j in ((0, 0), (0, 1), (1, 1)):
        mean = Psi[i, j] / (nu - d - 1)
        var = ((nu - d + 1) * Psi[i, j] ** 2 + (nu - d - 1) * Psi[i, i] * Psi[j, j]) / (
            (nu - d) * (nu - d - 1) ** 2 * (nu - d - 3))
        zs.append(moment_z(x[:, i, j], mean, var))
    out = [Check("V1", max(zs))]
    for label, fn, coef, idx in ((2, model.update_v2, state.outcome.beta_m, 0), (3, model.update_v3, state.mediator.alpha_a, 1)):
        v = coef[mx.gamma == label]
        shape, rate = 0.5 * (v.size + hyper.df), 0.5 * (hyper.psi0[idx][idx] + v @ v)
        x = np.array([fn(st, hyper, rng) for _ in range(draws)])
        out.append(Check(f"v{label}", ig_z(x, shape, rate)))
    return out


def check_outcome(data, state, hyper, rng, draws):
    o, md, mx = state.outcome, state.mediator, state.mixture
    out = []
    # single-coordinate beta_a
    r = _resid(data, state) + data.A * o.beta_a
    denom = o.sigma_e2 / o.sigma_a2 + data.A @ data.A
    st = copy.deepcopy(state)
    x = np.array([model.update_beta_a(st, data, rng) for _ in range(draws)])
    out.append(Check("beta_a", moment_z(x, data.A @ r / denom, o.sigma_e2 / denom)))

    # blocked (beta_a, beta_c, beta_m[S]) by dense least squares with the conditional prior
    S = np.flatnonzero(mx.gamma <= 2)
    X = np.column_stack([data.A, data.C, data.M[:, S]])
    V1 = mx.V1
    prior_var = np.concatenate([[o.sigma_a2], np.full(data.q, np.inf),
                                np.where(mx.gamma[S] == 1, V1[0, 0] - V1[0, 1] ** 2 / V1[1, 1], mx.v2)])
    prior_mean = np.concatenate([[0.0], np.zeros(data.q),
                                 np.where(mx.gamma[S] == 1, V1[0, 1] / V1[1, 1] * md.alpha_a[S], 0.0)])
    prec = X.T @ X / o.sigma_e2 + np.diag(1.0 / prior_var)
    cov = np.linalg.inv(prec)
    mean = cov @ (X.T @ data.Y / o.sigma_e2 + prior_mean / prior_var)
    st = copy.deepcopy(state)
    xs = np.array([model.update_outcome_block(st, data, rng) for _ in range(draws)])
    out.append(Check("outcome_block", max(moment_z(xs[:, i], mean[i], cov[i, i]) for i in range(mean.size))))

    # beta_c, first coordinate, from a reset state each draw
    w = 0
    cw = data.C[:, w]
    r = _resid(data, state) + cw * o.beta_c[w]
    ss = cw @ cw
    x = np.empty(draws)
    for t in range(draws):
        st = copy.deepcopy(state)
        x[t] = model.update_beta_c(st, data, rng)[w]
    out.append(Check("beta_c", moment_z(x, cw @ r / ss, o.sigma_e2 / ss)))

    # variances
    st = copy.deepcopy(state)
    x = np.array([model.update_sigma_a2(st, hyper, rng) for _ in range(draws)])
    out.append(Check("sigma_a2", ig_z(x, 0.5 + hyper.h_a, 0.5 * o.beta_a**2 + hyper.l_a)))
    rss = float(_resid(data, state) @ _resid(data, state))
    st = copy.deepcopy(state)
    x = np.array([model.update_sigma_e2(st, data, hyper, rng) for _ in range(draws)])
    out.append(Check("sigma_e2", ig_z(x, 0.5 * data.n + hyper.h1, 0.5 * rss + hyper.l1)))
    return out


def check_mediator(data, state, hyper, rng, draws):
    md = state.mediator
    out = []
    E = data.M - np.outer(data.A, md.alpha_a) - data.C @ md.alpha_c.T
    st = copy.deepcopy(state)
    x = np.array([model.update_sigma_g2(st, data, hyper, rng) for _ in range(draws)])
    out.append(Check("sigma_g2", ig_z(x, 0.5 * data.n * data.p + hyper.h2, 0.5 * float((E**2).sum()) + hyper.l2)))

    w, j = 0, 5
    cw = data.C[:, w]
    e = data.M[:, j] - data.A * md.alpha_a[j] - data.C @ md.alpha_c[j] + cw * md.alpha_c[j, w]
    ss = cw @ cw
    x = np.empty(draws)
    for t in range(draws):
        st = copy.deepcopy(state)
        x[t] = model.update_alpha_c(st, data, rng)[j, w]
    out.append(Check("alpha_c", moment_z(x, cw @ e / ss, md.sigma_g2 / ss)))
    return out


def check_corrs(rng, draws, p=5):
    g = np.random.default_rng(11)
    R = g.uniform(0.0, 0.6, (p, p))
    D = np.eye(p) + np.triu(R, 1) * 0.4 + np.triu(R, 1).T * 0.4
    hyper = Hyperparameters()
    st = corrs.CorrSState.initial(D, hyper)
    st.b = g.normal(-1.0, 1.0, (3, p))
    st.sigma_d2 = np.array([0.7, 1.5, 2.5])
    gamma = np.array([1, 2, 3, 4, 4], dtype=np.int64)
    st.w = corrs.sample_polya_gamma_array(corrs.stick_counts(gamma), st.b, np.random.default_rng(1))
    out = []
    Dinv = np.linalg.inv(D)
    n = np.stack([np.ones(p), gamma > 1, gamma > 2]).astype(float)
    for k in range(3):
        kappa = (gamma == k + 1) - n[k] / 2
        Q = Dinv / st.sigma_d2[k] + np.diag(st.w[k])
        cov = np.linalg.inv(Q)
        mean = cov @ (kappa + Dinv @ np.full(p, st.a[k]) / st.sigma_d2[k])
        s2 = copy.deepcopy(st)
        x = np.array([corrs.update_b_block(k, gamma, s2, rng).copy() for _ in range(draws)])
        out.append(Check(f"b_block[{k + 1}]", max(moment_z(x[:, j], mean[j], cov[j, j]) for j in range(p))))
    for k in range(3):
        d = st.b[k] - st.a[k]
        s2 = copy.deepcopy(st)
        x = np.array([corrs.update_sigma_d2(k, s2, hyper, rng) for _ in range(draws)])
        out.append(Check(f"sigma_d2[{k + 1}]",
                         ig_z(x, hyper.corrs_ig_shape + p / 2, hyper.corrs_ig_rate + 0.5 * d @ Dinv @ d)))
    s2 = copy.deepcopy(st)
    W = np.array([corrs.update_pg_auxiliaries(gamma, s2, rng).copy() for _ in range(draws)])
    zs = []
    for k in range(3):
        for j in range(p):
            if n[k, j] == 0:
                zs.append(0.0 if np.all(W[:, k, j] == 0) else math.inf)
            else:
                c = st.b[k, j]
                zs.append(moment_z(W[:, k, j], oracles.pg_mean(c), oracles.pg_var(c)))
    out.append(Check("pg_auxiliaries", max(zs)))
    return out


def run_all(rng, draws=10**4):
    data, state = frozen_problem()
    hyper = Hyperparameters()
    return (
        check_effect_pairs(data, state, rng, draws)
        + check_mixture_covariances(data, state, hyper, rng, draws)
        + check_outcome(data, state, hyper, rng, draws)
        + check_mediator(data, state, hyper, rng, draws)
        + check_corrs(rng, draws)
    )
