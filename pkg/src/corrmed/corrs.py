"""GMM-CorrS: correlated stick-breaking logits with Polya-Gamma augmentation.

Mediator j's mixing weights come from three logits b[:, j]:
pi_1 = expit(b_1), pi_2 = (1 - pi_1) expit(b_2), pi_3 = (1 - pi_1 - pi_2) expit(b_3),
pi_4 = remainder.  Each row b_k has prior MVN(a_k 1, sigma_d2[k] D).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import expit, log_expit, logit

from .model import (
    Hyperparameters,
    ModelData,
    SamplerConfig,
    initial_state,
    label_sweep,
    run_chain,
    update_shared,
)
from .stats import (
    NotPositiveDefiniteError,
    SymmetricMatrix,
    sample_inverse_gamma,
    sample_polya_gamma_array,
)

LOGIT_CLAMP = 35.0


def stick_probs(b):
    """Stick-breaking image of logits; ``b`` has shape (3,) or (3, p)."""
    b = np.asarray(b, dtype=float)
    s = expit(b)
    rest1 = 1.0 - s[0]
    rest2 = rest1 * (1.0 - s[1])
    return np.stack([s[0], rest1 * s[1], rest2 * s[2], rest2 * (1.0 - s[2])])


def stick_log_probs(b):
    """Log of :func:`stick_probs`, stable for large logits."""
    b = np.asarray(b, dtype=float)
    lp = log_expit(b)
    lq = log_expit(-b)
    return np.stack([lp[0], lq[0] + lp[1], lq[0] + lq[1] + lp[2], lq[0] + lq[1] + lq[2]])


def stick_logits(pi):
    """Inverse of :func:`stick_probs` for strictly positive probabilities."""
    pi = np.asarray(pi, dtype=float)
    r1 = 1.0 - pi[0]
    r2 = r1 - pi[1]
    return np.stack([logit(pi[0]), logit(pi[1] / r1), logit(pi[2] / r2)])


def stick_counts(gamma):
    """n[k, j] = 1 - sum_{k' < k} I(gamma_j = k') for k = 1, 2, 3 (rows 0..2)."""
    gamma = np.asarray(gamma)
    return np.stack([np.ones_like(gamma), gamma > 1, gamma > 2]).astype(np.int64)


@dataclass
class CorrSState:
    b: np.ndarray
    sigma_d2: np.ndarray
    D: SymmetricMatrix
    a: np.ndarray
    w: np.ndarray
    clamp_events: int = 0

    def __post_init__(self):
        if not isinstance(self.D, SymmetricMatrix):
            self.D = SymmetricMatrix(self.D, symmetrize=True)
        self.D.cholesky()
        self.Dinv = self.D.inverse()
        self.Dinv_one = self.Dinv.sum(axis=1)

    @property
    def p(self):
        return self.b.shape[1]

    @property
    def pi(self):
        return stick_probs(np.clip(self.b, -LOGIT_CLAMP, LOGIT_CLAMP)).T

    def log_pi(self):
        return stick_log_probs(np.clip(self.b, -LOGIT_CLAMP, LOGIT_CLAMP)).T

    @classmethod
    def initial(cls, D, hyper):
        D = D if isinstance(D, SymmetricMatrix) else SymmetricMatrix(D, symmetrize=True)
        p = D.dim
        a = np.asarray(hyper.corrs_prior_mean, dtype=float)
        b = np.repeat(a[:, None], p, axis=1)
        sd = np.full(3, hyper.corrs_ig_rate / max(hyper.corrs_ig_shape - 1.0, 1.0))
        return cls(b=b, sigma_d2=sd, D=D, a=a, w=np.zeros((3, p)))


def update_pg_auxiliaries(gamma, state, rng):
    counts = stick_counts(gamma)
    state.w = sample_polya_gamma_array(counts, state.b, rng)
    return state.w


def b_block_conditional(k, gamma, state):
    """(Cholesky factor of the precision, mean) of row k's full conditional."""
    counts = stick_counts(gamma)
    kappa = (np.asarray(gamma) == k + 1) - 0.5 * counts[k]
    Q = state.Dinv / state.sigma_d2[k]
    Q[np.diag_indices_from(Q)] += state.w[k]
    try:
        cf = cho_factor(Q, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        ev = np.linalg.eigvalsh(Q)
        raise NotPositiveDefiniteError(
            f"logit block {k + 1} precision not positive definite (condition estimate {ev.max() / max(abs(ev.min()), 1e-300):.3g})",
            float(ev.min()),
        ) from None
    h = kappa + state.a[k] * state.Dinv_one / state.sigma_d2[k]
    return cf, cho_solve(cf, h, check_finite=False)


def update_b_block(k, gamma, state, rng):
    cf, mean = b_block_conditional(k, gamma, state)
    z = rng.standard_normal(state.p)
    # cho_factor leaves junk above the diagonal; solve_triangular only reads the lower part
    b = mean + solve_triangular(cf[0], z, lower=True, trans="T", check_finite=False)
    over = np.abs(b) > LOGIT_CLAMP
    if over.any():
        state.clamp_events += int(over.sum())
        b = np.clip(b, -LOGIT_CLAMP, LOGIT_CLAMP)
    state.b[k] = b
    return b


def update_sigma_d2(k, state, hyper, rng):
    d = state.b[k] - state.a[k]
    quad = float(d @ state.Dinv @ d)
    state.sigma_d2[k] = sample_inverse_gamma(hyper.corrs_ig_shape + 0.5 * state.p, hyper.corrs_ig_rate + 0.5 * quad, rng)
    return state.sigma_d2[k]


def corrs_label_update(j, gamma, state, per_component_log_marginals, rng):
    """Draw gamma_j from pi_j times the data marginal; returns the label."""
    lw = state.log_pi()[j] + np.asarray(per_component_log_marginals, dtype=float)
    lw -= lw.max()
    w = np.exp(lw)
    k = int(rng.choice(4, p=w / w.sum())) + 1
    gamma[j] = k
    return k


def corrs_fit(dataset, D, hyper=None, config=None, rng=None):
    """GMM-CorrS chain; returns a :class:`~corrmed.analysis.PosteriorTrace`."""
    hyper = hyper or Hyperparameters()
    config = config or SamplerConfig()
    data = dataset if isinstance(dataset, ModelData) else ModelData(dataset, config.center, config.standardize)
    cs = CorrSState.initial(D, hyper)
    if cs.p != data.p:
        raise ValueError(f"D is {cs.p}x{cs.p} but data has {data.p} mediators")
    state = initial_state(data, hyper, rng)
    state.prior = cs

    def step(st, it):
        gamma = st.mixture.gamma
        update_pg_auxiliaries(gamma, cs, rng)
        for k in range(3):
            update_b_block(k, gamma, cs, rng)
        for k in range(3):
            update_sigma_d2(k, cs, hyper, rng)
        label_sweep(st, data, cs.log_pi(), rng)
        update_shared(st, data, hyper, rng)

    return run_chain(
        "corrs", data, hyper, config, rng, step, state,
        extras={"sigma_d2": lambda: cs.sigma_d2},
        diagnostics=lambda: {"logit_clamp_events": cs.clamp_events},
    )
