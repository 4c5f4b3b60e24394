"""Model posteriors and the fit dispatcher.

Model keys: ``dim`` (difference in means), ``zi`` / ``zi-pos`` (zero-inflated
normal, unconstrained / positive lift), ``ps`` (principal stratification),
``ps-cov`` (principal stratification with covariate-dependent strata).
"""

from __future__ import annotations

from typing import Sequence

from ..data import ExperimentDataset
from ..errors import ValidationError
from ..inference.hmc import PosteriorDraws, SamplerConfig, sample
from ..inference.target import TargetDensity
from .common import group_outcomes
from .diffmeans import DIM_PARAM_NAMES, DiffMeansParams, dim_posterior
from .strata import PS_PARAM_NAMES, StrataParams, ps_ate_draws, ps_log_likelihood, ps_posterior
from .strata_cov import CovStrataParams, mnl_strata_probs, psc_ate_draws, psc_posterior
from .zeroinflated import ZI_PARAM_NAMES, ZeroInflatedParams, zi_ate_draws, zi_posterior

MODEL_NAMES = ("dim", "zi", "zi-pos", "ps", "ps-cov")

__all__ = [
    "CovStrataParams",
    "DIM_PARAM_NAMES",
    "DiffMeansParams",
    "MODEL_NAMES",
    "PS_PARAM_NAMES",
    "StrataParams",
    "ZI_PARAM_NAMES",
    "ZeroInflatedParams",
    "build_posterior",
    "dim_posterior",
    "fit_model",
    "group_outcomes",
    "mnl_strata_probs",
    "ps_ate_draws",
    "ps_log_likelihood",
    "ps_posterior",
    "psc_ate_draws",
    "psc_posterior",
    "zi_ate_draws",
    "zi_posterior",
]


def build_posterior(
    model: str, data: ExperimentDataset, covariate_names: Sequence[str] = ()
) -> TargetDensity:
    """Construct the target density for a model key."""
    if model == "dim":
        return dim_posterior(data)
    if model == "zi":
        return zi_posterior(data, constrained=False)
    if model == "zi-pos":
        return zi_posterior(data, constrained=True)
    if model == "ps":
        return ps_posterior(data)
    if model == "ps-cov":
        if not covariate_names:
            raise ValidationError("model 'ps-cov' needs covariate column names")
        return psc_posterior(data, covariate_names)
    raise ValidationError(f"unknown model {model!r}; choose from {MODEL_NAMES}")


def fit_model(
    model: str,
    data: ExperimentDataset,
    config: SamplerConfig,
    covariate_names: Sequence[str] = (),
) -> PosteriorDraws:
    """Sample a model's posterior and attach its derived ATE draws."""
    target = build_posterior(model, data, covariate_names)
    draws = sample(target, config)
    if model == "dim":
        idx = draws.names.index("tau_d")
        return draws.with_derived(ate_log=draws.draws[:, :, idx].copy())
    if model in ("zi", "zi-pos"):
        return draws.with_derived(ate_log=zi_ate_draws(draws))
    if model == "ps":
        ate_log, ate_dollar = ps_ate_draws(draws)
        return draws.with_derived(ate_log=ate_log, ate_dollar=ate_dollar)
    return draws.with_derived(**psc_ate_draws(draws, data, covariate_names))
