"""Generic Bayesian computation: transforms, target densities, HMC, diagnostics."""

from .convergence import ConvergenceStat, SummaryStat, convergence, ess_bulk, split_rhat, summarize_draws
from .hmc import PosteriorDraws, SamplerConfig, sample
from .target import TargetDensity, finite_difference_gradient, gradient_check
from .transforms import (
    positive_to_unconstrained,
    simplex_chain_rule,
    simplex_to_unconstrained,
    transform_positive,
    transform_simplex,
)

__all__ = [
    "ConvergenceStat",
    "PosteriorDraws",
    "SamplerConfig",
    "SummaryStat",
    "TargetDensity",
    "convergence",
    "ess_bulk",
    "finite_difference_gradient",
    "gradient_check",
    "positive_to_unconstrained",
    "sample",
    "simplex_chain_rule",
    "simplex_to_unconstrained",
    "split_rhat",
    "summarize_draws",
    "transform_positive",
    "transform_simplex",
]
