"""GMM-Potts: Potts prior over mixture labels on a mediator graph.

Unnormalized prior: log p(gamma) = sum_j theta0[gamma_j] + sum_{i~j} theta1[k] I[gamma_i = gamma_j = k],
each edge counted once.  Labels are updated by collapsed single-site Gibbs
and Swendsen-Wang cluster moves; theta by double Metropolis-Hastings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from . import _kernels as K
from .graph import NeighborGraph, component_labels, path_component_labels
from .model import (
    Hyperparameters,
    ModelData,
    SamplerConfig,
    initial_state,
    label_sweep,
    run_chain,
    update_shared,
)


@dataclass
class PottsState:
    theta0: np.ndarray
    theta1: np.ndarray
    graph: NeighborGraph
    proposals: np.ndarray = field(default_factory=lambda: np.zeros((2, 4), dtype=np.int64))
    accepts: np.ndarray = field(default_factory=lambda: np.zeros((2, 4), dtype=np.int64))
    sw_sweeps: int = 0
    sw_skipped: int = 0

    def __post_init__(self):
        self.theta0 = np.array(self.theta0, dtype=float)
        self.theta1 = np.array(self.theta1, dtype=float)
        if self.theta0.shape != (4,) or self.theta1.shape != (4,):
            raise ValueError("theta0 and theta1 must have four entries")
        if not (np.all(np.isfinite(self.theta0)) and np.all(np.isfinite(self.theta1))):
            raise ValueError("theta must be finite")

    @classmethod
    def from_prior_mean(cls, graph, hyper):
        return cls(np.array(hyper.theta0_prior_mean), np.array(hyper.theta1_prior_mean), graph)

    def acceptance_rates(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.proposals > 0, self.accepts / np.maximum(self.proposals, 1), np.nan)


def potts_conditional_label(j, gamma, potts, data_log_marginals):
    """Label probabilities of site j given its neighbors and data terms."""
    lw = np.asarray(data_log_marginals, dtype=float) + potts.theta0
    for i in potts.graph.neighbors(j):
        g = gamma[i] - 1
        lw[g] += potts.theta1[g]
    lw -= lw.max()
    w = np.exp(lw)
    return w / w.sum()


@numba.njit(cache=True)
def suff_stats(gamma, ei, ej):
    """(label counts, same-label edge counts), both indexed by label - 1."""
    counts = np.zeros(4, dtype=np.int64)
    same = np.zeros(4, dtype=np.int64)
    for j in range(gamma.shape[0]):
        counts[gamma[j] - 1] += 1
    for e in range(ei.shape[0]):
        g = gamma[ei[e]]
        if g == gamma[ej[e]]:
            same[g - 1] += 1
    return counts, same


def potts_log_density(gamma, potts):
    """Unnormalized log prior of a label configuration."""
    g = potts.graph
    counts, same = suff_stats(np.asarray(gamma, dtype=np.int64), g.ei, g.ej)
    return float(counts @ potts.theta0 + same @ potts.theta1)


@numba.njit(cache=True)
def _fixed_site_sweep(gamma, logm, theta0, theta1, indptr, indices, rng):
    p = gamma.shape[0]
    order = K.permutation(p, rng)
    lw = np.empty(4)
    for t in range(p):
        j = order[t]
        for k in range(4):
            lw[k] = logm[j, k] + theta0[k]
        for e in range(indptr[j], indptr[j + 1]):
            g = gamma[indices[e]] - 1
            lw[g] += theta1[g]
        gamma[j] = K.categorical(lw, rng) + 1


@numba.njit(cache=True)
def _prior_sweeps(gamma, theta0, theta1, indptr, indices, sweeps, rng):
    zero = np.zeros((gamma.shape[0], 4))
    for _ in range(sweeps):
        _fixed_site_sweep(gamma, zero, theta0, theta1, indptr, indices, rng)


def single_site_sweep(gamma, potts, log_marginals, rng):
    """One random-order Gibbs pass with frozen per-site data terms (in place)."""
    g = potts.graph
    _fixed_site_sweep(gamma, np.ascontiguousarray(log_marginals, dtype=float), potts.theta0, potts.theta1,
                      g.indptr, g.indices, rng)
    return gamma


def sample_gamma_from_prior(potts, sweeps, init, rng):
    """Run ``sweeps`` single-site sweeps of the Potts prior starting from ``init``."""
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    gamma = np.array(init, dtype=np.int64)
    g = potts.graph
    _prior_sweeps(gamma, potts.theta0, potts.theta1, g.indptr, g.indices, int(sweeps), rng)
    return gamma


# ---------------------------------------------------------------------------
# Swendsen-Wang


@numba.njit(cache=True)
def _draw_bonds(gamma, ei, ej, theta1, rng):
    u = np.empty(ei.shape[0])
    for e in range(ei.shape[0]):
        g = gamma[ei[e]]
        if g == gamma[ej[e]]:
            u[e] = rng.random() * math.exp(theta1[g - 1])
        else:
            u[e] = rng.random()
    return u


def sw_bonds(gamma, potts, rng):
    """Step 1: bond values; the active bonds are those with u > 1."""
    g = potts.graph
    return _draw_bonds(np.asarray(gamma, dtype=np.int64), g.ei, g.ej, potts.theta1, rng)


def sw_components(graph, active):
    """Step 2: connected components of the active-bond subgraph."""
    active = np.asarray(active, dtype=np.bool_)
    if graph.is_path():
        return path_component_labels(graph.p, active)
    return component_labels(graph.p, graph.ei, graph.ej, active)


@numba.njit(cache=True)
def _cluster_bounds(comp, ncomp, u, ei, theta1):
    """Per-cluster admissible labels: exp(theta1[k]) must cover every active bond."""
    maxu = np.zeros(ncomp)
    for e in range(ei.shape[0]):
        if u[e] > 1.0:
            c = comp[ei[e]]
            if u[e] > maxu[c]:
                maxu[c] = u[e]
    allowed = np.ones((ncomp, 4), dtype=np.bool_)
    for c in range(ncomp):
        if maxu[c] > 0.0:
            for k in range(4):
                allowed[c, k] = maxu[c] <= math.exp(theta1[k])
    return allowed


@numba.njit(cache=True)
def _relabel_fixed(gamma, comp, ncomp, allowed, logm, theta0, rng):
    lw = np.zeros((ncomp, 4))
    for j in range(gamma.shape[0]):
        for k in range(4):
            lw[comp[j], k] += logm[j, k] + theta0[k]
    new = np.empty(ncomp, dtype=np.int64)
    for c in range(ncomp):
        for k in range(4):
            if not allowed[c, k]:
                lw[c, k] = -np.inf
        new[c] = K.categorical(lw[c], rng) + 1
    for j in range(gamma.shape[0]):
        gamma[j] = new[comp[j]]


def sw_applicable(potts):
    # with a negative coupling the bond constraints no longer factor over clusters
    return bool(np.all(potts.theta1 >= 0))


def sw_sweep(gamma, potts, log_marginals, rng):
    """Swendsen-Wang update with frozen per-site data terms (in place).

    Returns ``gamma`` unchanged when some theta1 entry is negative.
    """
    if not sw_applicable(potts):
        return gamma
    g = potts.graph
    if g.n_edges == 0:
        return single_site_sweep(gamma, potts, log_marginals, rng)
    u = sw_bonds(gamma, potts, rng)
    comp, ncomp = sw_components(g, u > 1.0)
    allowed = _cluster_bounds(comp, ncomp, u, g.ei, potts.theta1)
    _relabel_fixed(gamma, comp, ncomp, allowed, np.ascontiguousarray(log_marginals, dtype=float), potts.theta0, rng)
    return gamma


@numba.njit(cache=True)
def _fixed_chain(gamma, logm, theta0, theta1, indptr, indices, ei, ej, is_path, sweeps, sw_every, rng):
    p = gamma.shape[0]
    counts = np.zeros((p, 4), dtype=np.int64)
    use_sw = sw_every > 0 and ei.shape[0] > 0
    for k in range(4):
        if theta1[k] < 0:
            use_sw = False
    for s in range(sweeps):
        _fixed_site_sweep(gamma, logm, theta0, theta1, indptr, indices, rng)
        if use_sw and (s + 1) % sw_every == 0:
            u = _draw_bonds(gamma, ei, ej, theta1, rng)
            active = u > 1.0
            if is_path:
                comp, ncomp = path_component_labels(p, active)
            else:
                comp, ncomp = component_labels(p, ei, ej, active)
            allowed = _cluster_bounds(comp, ncomp, u, ei, theta1)
            _relabel_fixed(gamma, comp, ncomp, allowed, logm, theta0, rng)
        for j in range(p):
            counts[j, gamma[j] - 1] += 1
    return counts


def label_marginals(potts, log_marginals, sweeps, rng, sw_every=1, init=None):
    """Empirical label marginals (p x 4) of the combined kernel with frozen data terms."""
    g = potts.graph
    gamma = np.full(g.p, 4, dtype=np.int64) if init is None else np.array(init, dtype=np.int64)
    counts = _fixed_chain(gamma, np.ascontiguousarray(log_marginals, dtype=float), potts.theta0, potts.theta1,
                          g.indptr, g.indices, g.ei, g.ej, g.is_path(),
                          int(sweeps), int(sw_every), rng)
    return counts / float(sweeps)


@numba.njit(cache=True)
def _model_sw(gamma, beta_m, alpha_a, resid, M, MtM, w2_all, W22, inv_se2, V1inv, logdet_V1, v2, v3,
              theta0, theta1, ei, ej, is_path, rng):
    p = gamma.shape[0]
    u = _draw_bonds(gamma, ei, ej, theta1, rng)
    active = u > 1.0
    if is_path:
        comp, ncomp = path_component_labels(p, active)
    else:
        comp, ncomp = component_labels(p, ei, ej, active)
    allowed = _cluster_bounds(comp, ncomp, u, ei, theta1)
    size = np.zeros(ncomp, dtype=np.int64)
    for j in range(p):
        size[comp[j]] += 1
    start = np.zeros(ncomp + 1, dtype=np.int64)
    for c in range(ncomp):
        start[c + 1] = start[c] + size[c]
    members = np.empty(p, dtype=np.int64)
    fill = start[:-1].copy()
    for j in range(p):
        members[fill[comp[j]]] = j
        fill[comp[j]] += 1
    order = K.permutation(ncomp, rng)
    lp = np.empty(4)
    for t in range(ncomp):
        c = order[t]
        mem = members[start[c]:start[c + 1]]
        for k in range(4):
            lp[k] = mem.shape[0] * theta0[k]
        K.cluster_update(mem, gamma, beta_m, alpha_a, resid, M, MtM, w2_all, W22, inv_se2,
                         V1inv, logdet_V1, v2, v3, lp, allowed[c], rng)
    return ncomp


def model_sw_sweep(state, data, rng):
    """Swendsen-Wang move on the model: cluster labels with effect pairs integrated out jointly."""
    potts = state.prior
    if not sw_applicable(potts) or potts.graph.n_edges == 0:
        potts.sw_skipped += 1
        return
    o, md, mx = state.outcome, state.mediator, state.mixture
    g = potts.graph
    _model_sw(mx.gamma, o.beta_m, md.alpha_a, state.resid, data.M, data.MtM, data.w2_all(state),
              data.AA / md.sigma_g2, 1.0 / o.sigma_e2, np.linalg.inv(mx.V1), np.linalg.slogdet(mx.V1)[1],
              mx.v2, mx.v3, potts.theta0, potts.theta1, g.ei, g.ej,
              g.is_path(), rng)
    potts.sw_sweeps += 1


# ---------------------------------------------------------------------------
# double Metropolis-Hastings for theta


@numba.njit(cache=True)
def _dmh_one(k, row, gamma, theta0, theta1, mu, var, step, inner, indptr, indices, ei, ej, rng):
    theta = theta0 if row == 0 else theta1
    old = theta[k]
    new = old + step * rng.standard_normal()
    delta = new - old
    if delta == 0.0:
        return True
    t0 = theta0.copy()
    t1 = theta1.copy()
    if row == 0:
        t0[k] = new
    else:
        t1[k] = new
    aux = gamma.copy()
    _prior_sweeps(aux, t0, t1, indptr, indices, inner, rng)
    s_cur = suff_stats(gamma, ei, ej)[row][k]
    s_aux = suff_stats(aux, ei, ej)[row][k]
    log_r = -0.5 * ((new - mu) ** 2 - (old - mu) ** 2) / var + delta * (s_cur - s_aux)
    if math.log(rng.random()) < log_r:
        theta[k] = new
        return True
    return False


@numba.njit(cache=True)
def _dmh_all(gamma, theta0, theta1, mu, var, step, inner, indptr, indices, ei, ej, proposals, accepts, rng):
    for row in range(2):
        for k in range(4):
            proposals[row, k] += 1
            if _dmh_one(k, row, gamma, theta0, theta1, mu[row, k], var[row, k], step, inner,
                        indptr, indices, ei, ej, rng):
                accepts[row, k] += 1


def _theta_prior(hyper):
    mu = np.array([hyper.theta0_prior_mean, hyper.theta1_prior_mean], dtype=float)
    var = np.array([hyper.theta0_prior_var, hyper.theta1_prior_var], dtype=float)
    return mu, var


def dmh_update_theta(k, which, gamma, potts, hyper, rng, inner_sweeps=1, proposal_var=None):
    """Exchange-type update of theta0[k] or theta1[k]; returns True on acceptance.

    ``k`` is 0-based.  The proposal is N(theta, ``proposal_var``), by default
    ``hyper.dmh_step``.  The auxiliary configuration is produced by
    ``inner_sweeps`` prior sweeps started at ``gamma`` under the proposal.
    """
    if which not in ("theta0", "theta1"):
        raise ValueError("which must be 'theta0' or 'theta1'")
    if not 0 <= k < 4:
        raise ValueError("component index must be in 0..3")
    row = 0 if which == "theta0" else 1
    var_p = hyper.dmh_step if proposal_var is None else proposal_var
    mu, var = _theta_prior(hyper)
    g = potts.graph
    potts.proposals[row, k] += 1
    ok = _dmh_one(k, row, np.asarray(gamma, dtype=np.int64), potts.theta0, potts.theta1, mu[row, k], var[row, k],
                  math.sqrt(var_p), int(inner_sweeps), g.indptr, g.indices, g.ei, g.ej, rng)
    potts.accepts[row, k] += ok
    return bool(ok)


def update_theta(gamma, potts, hyper, rng, inner_sweeps=1):
    """DMH updates of every theta0[k], then every theta1[k]."""
    mu, var = _theta_prior(hyper)
    g = potts.graph
    _dmh_all(np.asarray(gamma, dtype=np.int64), potts.theta0, potts.theta1, mu, var, math.sqrt(hyper.dmh_step),
             int(inner_sweeps), g.indptr, g.indices, g.ei, g.ej, potts.proposals, potts.accepts, rng)


def potts_fit(dataset, graph, hyper=None, config=None, rng=None, potts=None):
    """GMM-Potts chain; returns a :class:`~corrmed.analysis.PosteriorTrace`."""
    hyper = hyper or Hyperparameters()
    config = config or SamplerConfig()
    data = dataset if isinstance(dataset, ModelData) else ModelData(dataset, config.center, config.standardize)
    if graph.p != data.p:
        raise ValueError(f"graph has {graph.p} nodes but data has {data.p} mediators")
    state = initial_state(data, hyper, rng)
    state.prior = potts or PottsState.from_prior_mean(graph, hyper)

    def step(st, it):
        pt = st.prior
        label_sweep(st, data, np.broadcast_to(pt.theta0, (data.p, 4)), rng, pt.graph, pt.theta1)
        if config.sw_every and (it + 1) % config.sw_every == 0:
            model_sw_sweep(st, data, rng)
        update_shared(st, data, hyper, rng)
        update_theta(st.mixture.gamma, pt, hyper, rng, config.dmh_inner_sweeps)

    def diagnostics():
        pt = state.prior
        rates = pt.acceptance_rates()
        return {
            "dmh_acceptance_theta0": rates[0].tolist(),
            "dmh_acceptance_theta1": rates[1].tolist(),
            "sw_sweeps": pt.sw_sweeps,
            "sw_skipped": pt.sw_skipped,
        }

    return run_chain(
        "potts", data, hyper, config, rng, step, state,
        extras={"theta0": lambda: state.prior.theta0, "theta1": lambda: state.prior.theta1},
        diagnostics=diagnostics,
    )
