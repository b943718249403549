"""Method dispatch: build the structure a method needs, then run its chain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corrs import corrs_fit
from .graph import NeighborGraph
from .model import Hyperparameters, ModelData, SamplerConfig, gmm_fit
from .potts import potts_fit
from .stats import SymmetricMatrix
from .structure import (
    CorrelationSummary,
    build_corrs_D,
    build_neighbor_graph,
    estimate_correlation,
    mediator_residuals,
    perturb_correlation,
    perturb_graph,
)

METHODS = ("gmm", "potts", "corrs")


@dataclass
class Structure:
    graph: NeighborGraph | None = None
    D: SymmetricMatrix | None = None
    threshold: float | None = None


def prepare_structure(method, dataset=None, graph=None, corr=None, graph_perturbation=0.0, corr_noise=0.0,
                      rng=None, graph_method="two-cluster"):
    """Neighbor graph (Potts) or D matrix (CorrS), supplied or estimated from ``dataset``.

    Estimation uses mediator residuals after regressing out the exposure and
    covariates.  Perturbations are applied afterwards and use ``rng``.
    """
    M = None if dataset is None else mediator_residuals(dataset.A, dataset.M, dataset.C)
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if method == "gmm":
        return Structure()
    if method == "potts":
        thr = None
        if graph is None:
            if M is None:
                raise ValueError("potts needs a graph file or mediator data to estimate one")
            rep = build_neighbor_graph(estimate_correlation(M), graph_method, rng=np.random.default_rng(0))
            graph, thr = rep.graph, rep.threshold
        if graph_perturbation > 0:
            graph = perturb_graph(graph, graph_perturbation, rng)
        return Structure(graph=graph, threshold=thr)
    if corr is None:
        if M is None:
            raise ValueError("corrs needs a correlation matrix or mediator data to estimate one")
        summary = estimate_correlation(M)
    else:
        summary = corr if isinstance(corr, CorrelationSummary) else CorrelationSummary(corr)
    if corr_noise > 0:
        summary = perturb_correlation(summary, corr_noise, rng)
    return Structure(D=build_corrs_D(summary))


def fit_chain(method, data, structure, hyper=None, config=None, rng=None):
    hyper = hyper or Hyperparameters()
    config = config or SamplerConfig()
    if not isinstance(data, ModelData):
        data = ModelData(data, config.center, config.standardize)
    if method == "gmm":
        return gmm_fit(data, hyper, config, rng)
    if method == "potts":
        return potts_fit(data, structure.graph, hyper, config, rng)
    if method == "corrs":
        return corrs_fit(data, structure.D, hyper, config, rng)
    raise ValueError(f"method must be one of {METHODS}, got {method!r}")
