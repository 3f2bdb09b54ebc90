"""Bayesian latent block model for spatial domains and discriminating genes.

Spots (columns) are clustered into spatial domains under a Markov random field
prior, genes (rows) into discriminating-gene groups plus a null set under a
zero-inflated Polya urn prior, with Poisson block likelihoods whose rates are
integrated out and sampled by collapsed Gibbs.
"""
__version__ = "0.1.0"

from .data import (BlockStats, CountMatrix, Hyperparameters, InputError, ModelState,
                   SpatialLayout, recompute_stats)
from .evaluate import MetricReport, adjusted_rand_index, dg_detection_metrics
from .ingest import build_adjacency, read_counts, write_counts
from .likelihood import (ScalingFactors, estimate_gene_effects, estimate_size_factors,
                         log_block_marginal, loglik_plugin)
from .priors import (gene_prior_conditional, log_mrf_prior_unnormalized, log_urn_prior,
                     spot_prior_conditional)
from .sampler import (McmcConfig, McmcSamples, posterior_rate_estimates, run_chain, run_mcmc,
                      update_gene, update_spot)
from .selection import MiclGrid, compute_micl, grid_search
from .simulate import SimConfig, generate_dataset
from .summary import FitSummary, compute_ppm, dahl_point_estimate, summarize_fit

__all__ = [
    "BlockStats", "CountMatrix", "Hyperparameters", "InputError", "ModelState", "SpatialLayout",
    "recompute_stats", "MetricReport", "adjusted_rand_index", "dg_detection_metrics",
    "build_adjacency", "read_counts", "write_counts", "ScalingFactors", "estimate_gene_effects",
    "estimate_size_factors", "log_block_marginal", "loglik_plugin", "gene_prior_conditional",
    "log_mrf_prior_unnormalized", "log_urn_prior", "spot_prior_conditional", "McmcConfig",
    "McmcSamples", "posterior_rate_estimates", "run_chain", "run_mcmc", "update_gene",
    "update_spot", "MiclGrid", "compute_micl", "grid_search", "SimConfig", "generate_dataset",
    "FitSummary", "compute_ppm", "dahl_point_estimate", "summarize_fit",
]
