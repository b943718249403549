"""Shared mediation model: data containers, mixture state and full conditionals.

Outcome model   Y = M beta_m + A beta_a + C beta_c + e,      e ~ N(0, sigma_e2)
Mediator model  M_j = A alpha_a[j] + C alpha_c[j] + e_j,     e_j ~ N(0, sigma_g2)

Each pair (beta_m[j], alpha_a[j]) comes from a four-component mixture:
1 = both nonzero with covariance V1, 2 = beta only (variance v2),
3 = alpha only (variance v3), 4 = both zero.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import _kernels as K
from .stats import sample_inverse_gamma, sample_inverse_wishart

LABELS = (1, 2, 3, 4)


class SamplerDivergence(RuntimeError):
    """A chain produced non-finite values; ``state_dump`` holds a summary."""

    def __init__(self, message, state_dump):
        super().__init__(message)
        self.state_dump = state_dump


@dataclass
class MediationDataset:
    A: np.ndarray
    M: np.ndarray
    Y: np.ndarray
    C: np.ndarray | None = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float).ravel()
        self.Y = np.asarray(self.Y, dtype=float).ravel()
        self.M = np.asarray(self.M, dtype=float)
        if self.M.ndim == 1:
            self.M = self.M[:, None]
        n = self.A.shape[0]
        if self.C is None:
            self.C = np.zeros((n, 0))
        self.C = np.asarray(self.C, dtype=float)
        if self.C.ndim == 1:
            self.C = self.C[:, None]
        if n < 2:
            raise ValueError("need at least two subjects")
        if self.M.shape[0] != n or self.Y.shape[0] != n or self.C.shape[0] != n:
            raise ValueError(
                f"row mismatch: A has {n}, M has {self.M.shape[0]}, Y has {self.Y.shape[0]}, C has {self.C.shape[0]}"
            )
        if self.M.shape[1] < 1:
            raise ValueError("need at least one mediator")
        for name in ("A", "M", "Y", "C"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite values")
        if self.q:
            ss = (self.C**2).sum(axis=0)
            bad = np.flatnonzero(ss == 0)
            if bad.size:
                raise ValueError(f"covariate column {int(bad[0])} is identically zero")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.M.shape[1]

    @property
    def q(self):
        return self.C.shape[1]

    def centered(self, standardize=False):
        """Column-centered copy; optionally scaled to unit variance."""

        def f(x):
            x = x - x.mean(axis=0)
            if standardize:
                sd = x.std(axis=0)
                x = x / np.where(sd > 0, sd, 1.0)
            return x

        C = f(self.C) if self.q else self.C
        return MediationDataset(f(self.A), f(self.M), f(self.Y), C)


def _logit(x):
    return math.log(x / (1.0 - x))


@dataclass
class Hyperparameters:
    psi0: tuple = ((1.0, 0.0), (0.0, 1.0))
    df: float = 4.0
    h_a: float = 2.0
    l_a: float = 1.0
    h1: float = 2.0
    l1: float = 1.0
    h2: float = 2.0
    l2: float = 1.0
    # Potts field prior: exp(theta0) proportional to (.05, .05, .10, .80)
    theta0_prior_mean: tuple = (
        math.log(0.05 / 0.80),
        math.log(0.05 / 0.80),
        math.log(0.10 / 0.80),
        0.0,
    )
    theta0_prior_var: tuple = (1.0, 1.0, 1.0, 1.0)
    theta1_prior_mean: tuple = (0.5, 0.5, 0.5, 0.5)
    theta1_prior_var: tuple = (1.0, 1.0, 1.0, 1.0)
    dmh_step: float = 0.1  # proposal variance of the theta random walk
    corrs_prior_mean: tuple = (_logit(0.05), _logit(0.05 / 0.95), _logit(0.10 / 0.90))
    corrs_ig_shape: float = 2.0
    corrs_ig_rate: float = 2.0
    dirichlet_alpha: tuple = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        psi = np.asarray(self.psi0, dtype=float)
        if psi.shape != (2, 2) or not np.allclose(psi, psi.T) or np.linalg.eigvalsh(psi).min() <= 0:
            raise ValueError("psi0 must be a 2x2 positive-definite matrix")
        if not self.df > 1:
            raise ValueError("df must exceed 1")
        for name in ("h_a", "l_a", "h1", "l1", "h2", "l2", "dmh_step", "corrs_ig_shape", "corrs_ig_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("theta0_prior_var", "theta1_prior_var", "dirichlet_alpha"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (4,) or np.any(v <= 0):
                raise ValueError(f"{name} must be four positive numbers")
        for name in ("theta0_prior_mean", "theta1_prior_mean"):
            if np.asarray(getattr(self, name)).shape != (4,):
                raise ValueError(f"{name} must have four entries")
        if np.asarray(self.corrs_prior_mean).shape != (3,):
            raise ValueError("corrs_prior_mean must have three entries")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown hyperparameter(s): {', '.join(sorted(unknown))}")
        conv = {k: (tuple(map(tuple, v)) if k == "psi0" else tuple(v) if isinstance(v, list) else v) for k, v in d.items()}
        return cls(**conv)

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = [list(r) for r in v] if f.name == "psi0" else list(v) if isinstance(v, tuple) else v
        return out


@dataclass
class OutcomeState:
    beta_m: np.ndarray
    beta_a: float
    beta_c: np.ndarray
    sigma_e2: float
    sigma_a2: float


@dataclass
class MediatorState:
    alpha_a: np.ndarray
    alpha_c: np.ndarray
    sigma_g2: float


@dataclass
class MixtureState:
    gamma: np.ndarray
    V1: np.ndarray
    v2: float
    v3: float

    def check_consistency(self, beta_m, alpha_a):
        g = self.gamma
        return bool(
            np.all(alpha_a[g == 2] == 0)
            and np.all(beta_m[g == 3] == 0)
            and np.all(beta_m[g == 4] == 0)
            and np.all(alpha_a[g == 4] == 0)
        )


@dataclass
class ChainState:
    outcome: OutcomeState
    mediator: MediatorState
    mixture: MixtureState
    prior: object = None
    resid: np.ndarray = field(default=None, repr=False)


@dataclass
class CausalEffects:
    nde: float
    nie: float
    te: float
    per_mediator_nie: np.ndarray


class ModelData:
    """Centered data plus the cross-products every sweep needs."""

    def __init__(self, dataset, center=True, standardize=False):
        ds = dataset.centered(standardize) if center else dataset
        self.dataset = ds
        self.n, self.p, self.q = ds.n, ds.p, ds.q
        self.A = ds.A
        self.Y = ds.Y
        self.C = ds.C
        self.M = np.asfortranarray(ds.M)
        self.mtm_diag = np.einsum("ij,ij->j", self.M, self.M)
        self.m_frob2 = float(self.mtm_diag.sum())
        self.MtA = self.M.T @ self.A
        self.AA = float(self.A @ self.A)
        self.MtC = self.M.T @ self.C
        self.CtA = self.C.T @ self.A
        self.CtC = self.C.T @ self.C
        self.MtY = self.M.T @ self.Y
        self.AY = float(self.A @ self.Y)
        self.CtY = self.C.T @ self.Y
        self._mtm = None

    @property
    def MtM(self):
        if self._mtm is None:
            self._mtm = np.ascontiguousarray(self.M.T @ self.M)
        return self._mtm

    def residual(self, state):
        o = state.outcome
        r = self.Y - self.M @ o.beta_m - self.A * o.beta_a
        if self.q:
            r = r - self.C @ o.beta_c
        return r

    def w2_all(self, state):
        """Exposure-side linear term sigma_g^-2 sum_i (M_ij - C_i alpha_c[j]) A_i."""
        md = state.mediator
        num = self.MtA - md.alpha_c @ self.CtA if self.q else self.MtA
        return num / md.sigma_g2


def initial_state(data, hyper, rng, init_pi=(0.05, 0.05, 0.10, 0.80)):
    """Labels iid from ``init_pi``, effects from their component priors."""
    p, q = data.p, data.q
    gamma = rng.choice(np.array(LABELS), size=p, p=np.asarray(init_pi) / np.sum(init_pi)).astype(np.int64)
    psi0 = np.asarray(hyper.psi0, dtype=float)
    V1 = psi0 / max(hyper.df - 3.0, 1.0)
    v2 = psi0[0, 0] / max(hyper.df - 2.0, 1.0)
    v3 = psi0[1, 1] / max(hyper.df - 2.0, 1.0)
    beta_m = np.zeros(p)
    alpha_a = np.zeros(p)
    L1 = np.linalg.cholesky(V1)
    for j in range(p):
        if gamma[j] == 1:
            beta_m[j], alpha_a[j] = L1 @ rng.standard_normal(2)
        elif gamma[j] == 2:
            beta_m[j] = math.sqrt(v2) * rng.standard_normal()
        elif gamma[j] == 3:
            alpha_a[j] = math.sqrt(v3) * rng.standard_normal()
    state = ChainState(
        outcome=OutcomeState(beta_m, 0.0, np.zeros(q), 1.0, 1.0),
        mediator=MediatorState(alpha_a, np.zeros((p, q)), 1.0),
        mixture=MixtureState(gamma, V1, v2, v3),
    )
    state.resid = data.residual(state)
    return state


# ---------------------------------------------------------------------------
# effect pairs and labels


def _site_terms(j, state, data):
    o, mx = state.outcome, state.mixture
    inv_se2 = 1.0 / o.sigma_e2
    r = state.resid if state.resid is not None else data.residual(state)
    W11 = inv_se2 * data.mtm_diag[j]
    w1 = inv_se2 * (data.M[:, j] @ r) + W11 * o.beta_m[j]
    w2 = data.w2_all(state)[j]
    W22 = data.AA / state.mediator.sigma_g2
    return w1, w2, W11, W22


def pair_precision(j, state, data):
    """(W_j, w_j): data precision and linear term of mediator j's effect pair."""
    w1, w2, W11, W22 = _site_terms(j, state, data)
    return np.diag([W11, W22]), np.array([w1, w2])


def component_log_marginal(j, k, state, data):
    """Log marginal likelihood of mediator j's data under component k.

    Measured relative to the all-zero pair, so k = 4 gives 0.  The Potts or
    mixing-weight prior term is not included.
    """
    if k not in LABELS:
        raise ValueError(f"component must be one of {LABELS}, got {k}")
    w1, w2, W11, W22 = _site_terms(j, state, data)
    mx = state.mixture
    out = np.empty(4)
    V1inv = np.linalg.inv(mx.V1)
    K.site_log_marginals(w1, w2, W11, W22, V1inv, np.linalg.slogdet(mx.V1)[1], mx.v2, mx.v3, out)
    return float(out[k - 1])


def site_log_marginals(state, data):
    """p x 4 matrix of :func:`component_log_marginal` at the current state."""
    return np.array([[component_log_marginal(j, k, state, data) for k in LABELS] for j in range(data.p)])


def update_effect_pair(j, label, state, data, rng):
    """Draw (beta_m[j], alpha_a[j]) given gamma_j = label; keeps residuals current."""
    if label not in LABELS:
        raise ValueError(f"label must be one of {LABELS}, got {label}")
    w1, w2, W11, W22 = _site_terms(j, state, data)
    mx, o = state.mixture, state.outcome
    b, a = K.draw_pair(label - 1, w1, w2, W11, W22, np.linalg.inv(mx.V1), mx.v2, mx.v3, rng)
    if state.resid is not None:
        state.resid -= data.M[:, j] * (b - o.beta_m[j])
    o.beta_m[j] = b
    state.mediator.alpha_a[j] = a
    mx.gamma[j] = label
    return b, a


def label_sweep(state, data, log_base, rng, graph=None, theta1=None):
    """Collapsed single-site updates of every (gamma_j, beta_m[j], alpha_a[j]).

    ``log_base`` is the p x 4 label log-prior before any neighbor terms;
    with a graph, ``theta1[k]`` is added per neighbor currently labelled k.
    """
    o, md, mx = state.outcome, state.mediator, state.mixture
    if graph is None:
        indptr = np.zeros(data.p + 1, dtype=np.int64)
        indices = np.zeros(0, dtype=np.int64)
        theta1 = np.zeros(4)
    else:
        indptr, indices = graph.indptr, graph.indices
    K.site_sweep(
        mx.gamma, o.beta_m, md.alpha_a, state.resid, data.M, data.mtm_diag, data.w2_all(state),
        data.AA / md.sigma_g2, 1.0 / o.sigma_e2, np.linalg.inv(mx.V1), np.linalg.slogdet(mx.V1)[1],
        mx.v2, mx.v3, np.ascontiguousarray(log_base, dtype=float), indptr, indices,
        np.asarray(theta1, dtype=float), rng,
    )


# ---------------------------------------------------------------------------
# mixture covariances


def update_V1(state, hyper, rng):
    mx = state.mixture
    sel = mx.gamma == 1
    pairs = np.column_stack([state.outcome.beta_m[sel], state.mediator.alpha_a[sel]])
    scale = np.asarray(hyper.psi0, dtype=float) + pairs.T @ pairs
    mx.V1 = sample_inverse_wishart(scale, sel.sum() + hyper.df, rng)
    return mx.V1


def update_v2(state, hyper, rng):
    mx = state.mixture
    b = state.outcome.beta_m[mx.gamma == 2]
    mx.v2 = sample_inverse_gamma(0.5 * (b.size + hyper.df), 0.5 * (hyper.psi0[0][0] + b @ b), rng)
    return mx.v2


def update_v3(state, hyper, rng):
    mx = state.mixture
    a = state.mediator.alpha_a[mx.gamma == 3]
    mx.v3 = sample_inverse_gamma(0.5 * (a.size + hyper.df), 0.5 * (hyper.psi0[1][1] + a @ a), rng)
    return mx.v3


# ---------------------------------------------------------------------------
# remaining conjugate conditionals


def beta_a_conditional(state, data):
    """(mean, variance) of beta_a given everything else."""
    o = state.outcome
    r = state.resid + data.A * o.beta_a
    mean = (data.A @ r) / (o.sigma_e2 / o.sigma_a2 + data.AA)
    var = 1.0 / (1.0 / o.sigma_a2 + data.AA / o.sigma_e2)
    return mean, var


def update_beta_a(state, data, rng):
    o = state.outcome
    mean, var = beta_a_conditional(state, data)
    new = mean + math.sqrt(var) * rng.standard_normal()
    state.resid -= data.A * (new - o.beta_a)
    o.beta_a = new
    return new


def outcome_block_conditional(state, data):
    """Joint Gaussian conditional of (beta_a, beta_c, beta_m[S]) given labels and alpha.

    S holds the mediators labelled 1 or 2.  A label-1 coefficient has the
    conditional prior N(V1_12 / V1_22 alpha_j, V1_11 - V1_12^2 / V1_22).
    Returns (S, precision, mean).
    """
    o, mx = state.outcome, state.mixture
    S = np.flatnonzero(mx.gamma <= 2)
    q = data.q
    d = 1 + q + S.size
    G = np.empty((d, d))
    G[0, 0] = data.AA
    G[0, 1 : 1 + q] = data.CtA
    G[0, 1 + q :] = data.MtA[S]
    G[1 : 1 + q, 1 : 1 + q] = data.CtC
    G[1 : 1 + q, 1 + q :] = data.MtC[S].T
    G[1 + q :, 1 + q :] = data.MtM[np.ix_(S, S)]
    iu = np.triu_indices(d, 1)
    G[iu[1], iu[0]] = G[iu]
    h = np.concatenate([[data.AY], data.CtY, data.MtY[S]]) / o.sigma_e2
    P = G / o.sigma_e2
    prec0 = np.zeros(d)
    mean0 = np.zeros(d)
    prec0[0] = 1.0 / o.sigma_a2
    V1 = mx.V1
    lab1 = mx.gamma[S] == 1
    cond_var = V1[0, 0] - V1[0, 1] ** 2 / V1[1, 1]
    prec0[1 + q :] = np.where(lab1, 1.0 / cond_var, 1.0 / mx.v2)
    mean0[1 + q :] = np.where(lab1, V1[0, 1] / V1[1, 1] * state.mediator.alpha_a[S], 0.0)
    P[np.diag_indices(d)] += prec0
    h += prec0 * mean0
    L = np.linalg.cholesky(P)
    mean = np.linalg.solve(L.T, np.linalg.solve(L, h))
    return S, P, mean, L


def update_outcome_block(state, data, rng):
    """Blocked draw of beta_a, beta_c and the nonzero beta_m given the labels.

    Moves along the direction where beta_a trades off against mediators
    correlated with the exposure, which single-coordinate updates cross slowly.
    """
    o = state.outcome
    S, _, mean, L = outcome_block_conditional(state, data)
    x = mean + np.linalg.solve(L.T, rng.standard_normal(mean.size))
    q = data.q
    o.beta_a = float(x[0])
    o.beta_c = x[1 : 1 + q].copy()
    o.beta_m[S] = x[1 + q :]
    state.resid = data.residual(state)
    return x


def update_sigma_a2(state, hyper, rng):
    o = state.outcome
    o.sigma_a2 = sample_inverse_gamma(0.5 + hyper.h_a, 0.5 * o.beta_a**2 + hyper.l_a, rng)
    return o.sigma_a2


def update_sigma_e2(state, data, hyper, rng):
    o = state.outcome
    rss = float(state.resid @ state.resid)
    o.sigma_e2 = sample_inverse_gamma(0.5 * data.n + hyper.h1, 0.5 * rss + hyper.l1, rng)
    return o.sigma_e2


def mediator_rss(state, data):
    """sum_ij (M_ij - A_i alpha_a[j] - C_i alpha_c[j])^2 via cross-products."""
    md = state.mediator
    a = md.alpha_a
    rss = data.m_frob2 - 2.0 * a @ data.MtA + data.AA * (a @ a)
    if data.q:
        ac = md.alpha_c
        rss += -2.0 * np.sum(ac * data.MtC) + 2.0 * a @ (ac @ data.CtA) + np.einsum("jw,wv,jv->", ac, data.CtC, ac)
    return max(rss, 0.0)


def update_sigma_g2(state, data, hyper, rng):
    md = state.mediator
    rss = mediator_rss(state, data)
    md.sigma_g2 = sample_inverse_gamma(0.5 * data.p * data.n + hyper.h2, 0.5 * rss + hyper.l2, rng)
    return md.sigma_g2


def update_beta_c(state, data, rng):
    o = state.outcome
    for w in range(data.q):
        cw = data.C[:, w]
        ss = data.CtC[w, w]
        r = state.resid + cw * o.beta_c[w]
        new = (cw @ r) / ss + math.sqrt(o.sigma_e2 / ss) * rng.standard_normal()
        state.resid = r - cw * new
        o.beta_c[w] = new
    return o.beta_c


def update_alpha_c(state, data, rng):
    md = state.mediator
    for w in range(data.q):
        ss = data.CtC[w, w]
        others = md.alpha_c @ data.CtC[:, w] - md.alpha_c[:, w] * ss
        mean = (data.MtC[:, w] - md.alpha_a * data.CtA[w] - others) / ss
        md.alpha_c[:, w] = mean + math.sqrt(md.sigma_g2 / ss) * rng.standard_normal(data.p)
    return md.alpha_c


def update_shared(state, data, hyper, rng):
    """V-updates then every conditional common to the three samplers."""
    update_V1(state, hyper, rng)
    update_v2(state, hyper, rng)
    update_v3(state, hyper, rng)
    update_outcome_block(state, data, rng)
    update_sigma_a2(state, hyper, rng)
    update_alpha_c(state, data, rng)
    update_sigma_e2(state, data, hyper, rng)
    update_sigma_g2(state, data, hyper, rng)


# ---------------------------------------------------------------------------
# baseline GMM: one set of mixing weights shared by all mediators


@dataclass
class GMMState:
    pi: np.ndarray


def update_shared_proportions(state, hyper, rng):
    counts = np.bincount(state.mixture.gamma, minlength=5)[1:]
    state.prior.pi = rng.dirichlet(np.asarray(hyper.dirichlet_alpha) + counts)
    return state.prior.pi


def baseline_gmm_sweep(state, data, hyper, rng):
    update_shared_proportions(state, hyper, rng)
    log_base = np.broadcast_to(np.log(state.prior.pi), (data.p, 4))
    label_sweep(state, data, log_base, rng)
    update_shared(state, data, hyper, rng)
    return state


# ---------------------------------------------------------------------------


def causal_effects(outcome, mediator, a, a_star):
    contrast = a - a_star
    per = contrast * mediator.alpha_a * outcome.beta_m
    nde = outcome.beta_a * contrast
    nie = float(per.sum())
    return CausalEffects(nde=nde, nie=nie, te=nde + nie, per_mediator_nie=per)


# ---------------------------------------------------------------------------
# chain driver


@dataclass
class SamplerConfig:
    iterations: int = 15000
    burnin: int = 5000
    thin: int = 10
    sw_every: int = 10
    dmh_inner_sweeps: int = 1
    center: bool = True
    standardize: bool = False

    def __post_init__(self):
        if self.iterations < 1 or self.thin < 1:
            raise ValueError("iterations and thin must be positive")
        if not 0 <= self.burnin < self.iterations:
            raise ValueError("burn-in must be in [0, iterations)")
        if self.sw_every < 0 or self.dmh_inner_sweeps < 1:
            raise ValueError("sw_every must be >= 0 and dmh_inner_sweeps >= 1")

    @property
    def n_retained(self):
        return len(range(self.burnin, self.iterations, self.thin))


def dump_state(state):
    o, md, mx = state.outcome, state.mediator, state.mixture
    return {
        "beta_a": o.beta_a,
        "sigma_e2": o.sigma_e2,
        "sigma_a2": o.sigma_a2,
        "sigma_g2": md.sigma_g2,
        "V1": np.asarray(mx.V1).tolist(),
        "v2": mx.v2,
        "v3": mx.v3,
        "label_counts": np.bincount(mx.gamma, minlength=5)[1:].tolist(),
        "max_abs_beta_m": float(np.nanmax(np.abs(o.beta_m))),
        "max_abs_alpha_a": float(np.nanmax(np.abs(md.alpha_a))),
        "nonfinite_resid": int((~np.isfinite(state.resid)).sum()) if state.resid is not None else None,
    }


def run_chain(method, data, hyper, config, rng, step, state, extras=None, diagnostics=None):
    """Iterate ``step(state, it)`` and collect retained draws.

    ``extras`` maps names to zero-argument callables recorded with each
    retained draw (prior-specific parameters).
    """
    from .analysis import PosteriorTrace

    extras = extras or {}
    T = config.n_retained
    p = data.p
    rec = {
        "gamma": np.empty((T, p), dtype=np.int8),
        "beta_m": np.empty((T, p)),
        "alpha_a": np.empty((T, p)),
    }
    scal = {name: np.empty(T) for name in ("beta_a", "sigma_e2", "sigma_a2", "sigma_g2")}
    ext = {}
    t = 0
    start = time.perf_counter()
    for it in range(config.iterations):
        state.resid = data.residual(state)
        step(state, it)
        if not np.all(np.isfinite(state.resid)) or not math.isfinite(state.outcome.sigma_e2):
            raise SamplerDivergence(f"non-finite residuals at iteration {it}", dump_state(state))
        if it >= config.burnin and (it - config.burnin) % config.thin == 0:
            o, md = state.outcome, state.mediator
            rec["gamma"][t] = state.mixture.gamma
            rec["beta_m"][t] = o.beta_m
            rec["alpha_a"][t] = md.alpha_a
            scal["beta_a"][t] = o.beta_a
            scal["sigma_e2"][t] = o.sigma_e2
            scal["sigma_a2"][t] = o.sigma_a2
            scal["sigma_g2"][t] = md.sigma_g2
            for name, get in extras.items():
                v = np.asarray(get(), dtype=float)
                if name not in ext:
                    ext[name] = np.empty((T,) + v.shape)
                ext[name][t] = v
            t += 1
    diag = dict(diagnostics() if callable(diagnostics) else (diagnostics or {}))
    diag["wall_time_s"] = time.perf_counter() - start
    return PosteriorTrace(method=method, gamma=rec["gamma"], beta_m=rec["beta_m"], alpha_a=rec["alpha_a"],
                          scalars=scal, extras=ext, diagnostics=diag)


def gmm_fit(dataset, hyper=None, config=None, rng=None):
    """Baseline GMM with shared Dirichlet mixing proportions."""
    hyper = hyper or Hyperparameters()
    config = config or SamplerConfig()
    data = dataset if isinstance(dataset, ModelData) else ModelData(dataset, config.center, config.standardize)
    state = initial_state(data, hyper, rng)
    state.prior = GMMState(pi=np.array([0.05, 0.05, 0.10, 0.80]))

    def step(st, it):
        baseline_gmm_sweep(st, data, hyper, rng)

    return run_chain("gmm", data, hyper, config, rng, step, state, extras={"pi": lambda: state.prior.pi})
