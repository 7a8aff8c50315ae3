"""Mixture modelling for networks via stochastic blockmodels.

Fits Bernoulli, Poisson, and degree-corrected blockmodels with three
engines: variational EM, vertex-switching search, and Monte-Carlo EM
over a piecewise-constant graphon with per-node allocation uncertainty.
"""

from blockmix.graph import (
    EdgeListError,
    Network,
    degrees,
    density,
    discretize_weights,
    load_edge_list,
    load_labels,
    load_weighted_edge_list,
    to_edge_list_text,
)
from blockmix.models import (
    BlockParams,
    GraphonStep,
    Partition,
    bernoulli_loglik,
    dc_poisson_loglik,
    graphon_eval,
    mle_block_params,
    poisson_complete_loglik,
)
from blockmix.generate import GenConfig, sample_sbm
from blockmix.vem import VemConfig, vem_fit
from blockmix.switch import MoveDelta, SwitchConfig, delta_loglik, profile_loglik, switch_fit
from blockmix.mcem import (
    LatentPositions,
    McemConfig,
    PosteriorSummary,
    gini_uncertainty,
    mcem_fit,
)
from blockmix.evaluate import PartitionComparison, rand_index
from blockmix.results import FitResult, from_json, to_json

__version__ = "0.1.0"

__all__ = [
    "EdgeListError",
    "Network",
    "degrees",
    "density",
    "discretize_weights",
    "load_edge_list",
    "load_labels",
    "load_weighted_edge_list",
    "to_edge_list_text",
    "BlockParams",
    "GraphonStep",
    "Partition",
    "bernoulli_loglik",
    "dc_poisson_loglik",
    "graphon_eval",
    "mle_block_params",
    "poisson_complete_loglik",
    "GenConfig",
    "sample_sbm",
    "VemConfig",
    "vem_fit",
    "MoveDelta",
    "SwitchConfig",
    "delta_loglik",
    "profile_loglik",
    "switch_fit",
    "LatentPositions",
    "McemConfig",
    "PosteriorSummary",
    "gini_uncertainty",
    "mcem_fit",
    "PartitionComparison",
    "rand_index",
    "FitResult",
    "from_json",
    "to_json",
    "__version__",
]
