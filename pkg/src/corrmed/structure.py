"""Mediator structure: correlation estimates, Potts graph, CorrS D matrix, perturbations."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .graph import NeighborGraph
from .stats import nearest_positive_definite


@dataclass
class CorrelationSummary:
    corr: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.corr, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("correlation matrix must be square")
        if not np.allclose(c, c.T, atol=1e-12):
            raise ValueError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(c), 1.0):
            raise ValueError("correlation matrix must have unit diagonal")
        if np.any(np.abs(c) > 1 + 1e-12):
            raise ValueError("correlations must lie in [-1, 1]")
        c = 0.5 * (c + c.T)
        np.fill_diagonal(c, 1.0)
        self.corr = np.clip(c, -1.0, 1.0)

    @property
    def p(self):
        return self.corr.shape[0]

    @property
    def abs_corr(self):
        return np.abs(self.corr)

    @property
    def offdiag_values(self):
        return self.corr[np.triu_indices(self.p, 1)]


def estimate_correlation(M):
    """Pearson correlation of the columns of ``M``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < 3:
        raise ValueError("need an n x p matrix with n >= 3")
    sd = M.std(axis=0)
    const = np.flatnonzero(sd == 0)
    if const.size:
        raise ValueError(f"mediator column {int(const[0])} is constant")
    Z = (M - M.mean(axis=0)) / sd
    c = np.clip(Z.T @ Z / M.shape[0], -1.0, 1.0)
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return CorrelationSummary(c)


def mediator_residuals(A, M, C=None):
    """Mediators with exposure and covariates regressed out (least squares, with intercept).

    Mediator correlations induced by a shared exposure effect are removed, so
    what remains estimates the noise correlation of the mediator model.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    cols = [np.ones(n), np.asarray(A, dtype=float).ravel()]
    if C is not None and np.size(C):
        cols.append(np.asarray(C, dtype=float).reshape(n, -1))
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, M, rcond=None)
    return M - X @ coef


def two_means_1d(x, rng=None, restarts=10, max_iter=100):
    """Two-cluster k-means on a 1-D sample; returns sorted centers (low, high)."""
    x = np.asarray(x, dtype=float)
    rng = rng if rng is not None else np.random.default_rng(0)
    xs = np.sort(x)
    best, best_sse = None, np.inf
    for r in range(restarts):
        if r == 0:
            c = np.array([xs[0], xs[-1]])
        else:
            c = np.sort(rng.choice(xs, 2, replace=False))
        for _ in range(max_iter):
            cut = 0.5 * (c[0] + c[1])
            k = np.searchsorted(xs, cut, side="left")
            lo, hi = xs[:k], xs[k:]
            if lo.size == 0 or hi.size == 0:
                break
            new = np.array([lo.mean(), hi.mean()])
            if np.allclose(new, c):
                c = new
                break
            c = new
        cut = 0.5 * (c[0] + c[1])
        k = np.searchsorted(xs, cut, side="left")
        if k == 0 or k == xs.size:
            continue
        sse = ((xs[:k] - xs[:k].mean()) ** 2).sum() + ((xs[k:] - xs[k:].mean()) ** 2).sum()
        if sse < best_sse:
            best_sse, best = sse, np.array([xs[:k].mean(), xs[k:].mean()])
    return best


@dataclass
class GraphReport:
    graph: NeighborGraph
    threshold: float
    n_edges: int


GRAPH_METHODS = ("two-cluster", "two-cluster-abs")


def build_neighbor_graph(summary, method="two-cluster", rng=None):
    """Edges between mediators whose correlation falls in the high cluster.

    ``two-cluster`` runs two-means on squared correlations; ``two-cluster-abs``
    on absolute correlations.  Either way the cut is the midpoint of the two
    centers, reported on the |correlation| scale, and (i, j) is an edge iff
    |corr_ij| >= threshold.
    """
    if method not in GRAPH_METHODS:
        raise ValueError(f"unknown graph method {method!r}; choose from {GRAPH_METHODS}")
    p = summary.p
    if p < 2:
        raise ValueError("need at least two mediators")
    vals = np.abs(summary.offdiag_values)
    x = vals**2 if method == "two-cluster" else vals
    centers = None if np.ptp(x) == 0 else two_means_1d(x, rng)
    if centers is None:
        warnings.warn("all correlations are equal; returning an empty graph", stacklevel=2)
        return GraphReport(NeighborGraph(p), np.inf, 0)
    thr = 0.5 * (centers[0] + centers[1])
    if method == "two-cluster":
        thr = float(np.sqrt(thr))
    i, j = np.triu_indices(p, 1)
    keep = vals >= thr
    g = NeighborGraph(p, np.column_stack([i[keep], j[keep]]))
    return GraphReport(g, float(thr), g.n_edges)


def build_corrs_D(summary, eigen_floor=1e-6):
    """Absolute correlations projected to the nearest PD matrix with unit diagonal."""
    return nearest_positive_definite(summary.abs_corr, eigen_floor=eigen_floor)


def perturb_graph(graph, rate, rng):
    """Remove floor(rate |E|) edges (at least one when rate > 0) and add as many non-edges."""
    if not 0 <= rate <= 1:
        raise ValueError("rate must be in [0, 1]")
    E = graph.n_edges
    m = int(np.floor(rate * E))
    if rate > 0 and E >= 1:
        m = max(m, 1)
    if m == 0:
        return NeighborGraph(graph.p, graph.edges)
    p = graph.p
    total = p * (p - 1) // 2
    if total - E < m:
        raise ValueError(f"only {total - E} non-edges available, need {m}")
    adj = graph.adjacency()
    drop = rng.choice(E, m, replace=False)
    kept = np.delete(graph.edges, drop, axis=0)
    i, j = np.triu_indices(p, 1)
    non = np.flatnonzero(~adj[i, j])
    add = rng.choice(non, m, replace=False)
    new = np.vstack([kept, np.column_stack([i[add], j[add]])])
    return NeighborGraph(p, new)


def perturb_correlation(summary, noise_sd, rng):
    """Symmetric N(0, noise_sd^2) jitter on off-diagonals, clipped to [-1, 1]."""
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    c = summary.corr.copy()
    if noise_sd == 0:
        return CorrelationSummary(c)
    p = summary.p
    i, j = np.triu_indices(p, 1)
    c[i, j] = np.clip(c[i, j] + noise_sd * rng.standard_normal(i.size), -1.0, 1.0)
    c[j, i] = c[i, j]
    return CorrelationSummary(c)
