"""Bayesian high-dimensional mediation analysis with correlated mediators.

Three samplers share one mediation model: a baseline Gaussian mixture with
shared mixing weights (``gmm``), a Potts prior over mixture labels on a
mediator graph (``potts``), and correlated stick-breaking logits with
Polya-Gamma augmentation (``corrs``).
"""

from .analysis import PosteriorTrace, compute_pips, locfdr_threshold, psrf, selection_report, tpr_at_fixed_fdr
from .corrs import corrs_fit
from .fitting import METHODS, fit_chain, prepare_structure
from .graph import NeighborGraph
from .model import Hyperparameters, MediationDataset, SamplerConfig, causal_effects, gmm_fit
from .potts import PottsState, potts_fit
from .stats import make_rng

__version__ = "0.1.0"

__all__ = [
    "METHODS",
    "Hyperparameters",
    "MediationDataset",
    "NeighborGraph",
    "PosteriorTrace",
    "PottsState",
    "SamplerConfig",
    "causal_effects",
    "compute_pips",
    "corrs_fit",
    "fit_chain",
    "gmm_fit",
    "locfdr_threshold",
    "make_rng",
    "potts_fit",
    "prepare_structure",
    "psrf",
    "selection_report",
    "tpr_at_fixed_fdr",
]
