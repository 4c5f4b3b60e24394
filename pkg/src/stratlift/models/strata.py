"""Principal stratification model without covariates.

Customers split into three latent strata by their potential purchase
behavior: always-buy (A), influenced (I, buy only when treated) and never-buy
(N). The observed data fall into four groups with marginal likelihood

* treated purchaser:      log(pi_a * N(l | mu_a1, sigma) + pi_i * N(l | mu_i1, sigma))
* treated non-purchaser:  log(pi_n)
* control purchaser:      log(pi_a) + log N(l | mu_a0, sigma)
* control non-purchaser:  log(pi_i + pi_n)

with l = log(y + 1). The shares identify from the count groups, mu_a0 and
sigma from control purchasers, and (mu_a1, mu_i1) from the treated mixture.
Priors: Dirichlet(2,2,2) on the shares, N(0, 20) on the (standardized) cell
means, half-N(0, 1) on the (standardized) sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..data import ExperimentDataset
from ..diagnostics import expected_lognormal_mean
from ..errors import ValidationError
from ..inference.hmc import PosteriorDraws
from ..inference.target import TargetDensity
from ..inference.transforms import simplex_chain_rule, simplex_to_unconstrained, transform_simplex
from .common import (
    MEAN_PRIOR_VAR,
    OutcomeGroups,
    group_outcomes,
    normal_logpdf,
    normal_suffstat_loglik,
    plugin_shares,
)

PS_PARAM_NAMES = ("pi_a", "pi_i", "pi_n", "mu_a0", "mu_a1", "mu_i1", "sigma")


@dataclass(frozen=True)
class StrataParams:
    """Model parameters: strata shares plus log-scale response cells."""

    pi: tuple[float, float, float]  # (A, I, N)
    mu_a0: float
    mu_a1: float
    mu_i1: float
    sigma: float

    def __post_init__(self) -> None:
        if abs(sum(self.pi) - 1.0) > 1e-9 or any(p < 0 for p in self.pi):
            raise ValidationError(f"pi must be a 3-simplex, got {self.pi}")
        if self.sigma <= 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")

    @property
    def pi_a(self) -> float:
        return self.pi[0]

    @property
    def pi_i(self) -> float:
        return self.pi[1]

    @property
    def pi_n(self) -> float:
        return self.pi[2]

    def ate_log(self) -> float:
        return self.pi_a * (self.mu_a1 - self.mu_a0) + self.pi_i * self.mu_i1

    def ate_dollar(self) -> float:
        gain_a = expected_lognormal_mean(self.mu_a1, self.sigma) - expected_lognormal_mean(
            self.mu_a0, self.sigma
        )
        return self.pi_a * gain_a + self.pi_i * expected_lognormal_mean(self.mu_i1, self.sigma)


def _loglik_terms(
    pi: np.ndarray,
    mu_a0: float,
    mu_a1: float,
    mu_i1: float,
    sigma: float,
    groups: OutcomeGroups,
) -> float:
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi)
    log_mix_ctrl0 = math.log(pi[1] + pi[2]) if pi[1] + pi[2] > 0 else -math.inf
    ll = (
        groups.n_t0 * log_pi[2]
        + groups.n_c0 * log_mix_ctrl0
        + groups.n_c1 * log_pi[0]
        + normal_suffstat_loglik(groups.n_c1, groups.sum_c, groups.sumsq_c, mu_a0, sigma)
    )
    la = log_pi[0] + normal_logpdf(groups.ell_t, mu_a1, sigma)
    li = log_pi[1] + normal_logpdf(groups.ell_t, mu_i1, sigma)
    return float(ll + np.logaddexp(la, li).sum())


def ps_log_likelihood(params: StrataParams, data: ExperimentDataset) -> float:
    """Marginal log likelihood of the observed data on the raw log(y+1) scale."""
    groups = group_outcomes(data)
    # undo the internal standardization: evaluate at equivalent standardized params
    s = groups.scale
    return _loglik_terms(
        np.asarray(params.pi),
        (params.mu_a0 - groups.center) / s,
        (params.mu_a1 - groups.center) / s,
        (params.mu_i1 - groups.center) / s,
        params.sigma / s,
        groups,
    ) - (groups.n_c1 + groups.n_t1) * math.log(s)


def ps_posterior(data: ExperimentDataset) -> TargetDensity:
    """Posterior over (shares, cell means, sigma) as a target density.

    Unconstrained coordinates: two simplex logits, three standardized means,
    log sigma. ``constrain`` reports parameters on the original log scale.
    """
    groups = group_outcomes(data)
    shares0 = plugin_shares(data)

    def split(v: np.ndarray):
        pi, _ = transform_simplex(v[:2])
        return pi, v[2], v[3], v[4], math.exp(v[5])

    def logp(v: np.ndarray) -> float:
        pi, m0, m1, mi, s = split(v)
        ll = _loglik_terms(pi, m0, m1, mi, s, groups)
        log_prior_pi = 2.0 * float(np.log(pi).sum())  # Dirichlet(2,2,2) + simplex Jacobian
        log_prior_means = -(m0 * m0 + m1 * m1 + mi * mi) / (2.0 * MEAN_PRIOR_VAR)
        log_prior_sigma = -0.5 * s * s + v[5]  # half-normal + positive Jacobian
        return ll + log_prior_pi + log_prior_means + log_prior_sigma

    def grad(v: np.ndarray) -> np.ndarray:
        pi, m0, m1, mi, s = split(v)
        ell = groups.ell_t
        la = np.log(pi[0]) + normal_logpdf(ell, m1, s)
        li = np.log(pi[1]) + normal_logpdf(ell, mi, s)
        lse = np.logaddexp(la, li)
        w = np.exp(la - lse)  # responsibility of the always-buy component
        sum_w = float(w.sum())
        sum_1w = groups.n_t1 - sum_w

        g_pi = np.array(
            [
                (groups.n_c1 + sum_w) / pi[0],
                groups.n_c0 / (pi[1] + pi[2]) + sum_1w / pi[1],
                groups.n_c0 / (pi[1] + pi[2]) + groups.n_t0 / pi[2],
            ]
        )
        grad_logits = simplex_chain_rule(pi, g_pi) + (2.0 - 6.0 * pi[:2])

        s2, s3 = s * s, s * s * s
        resid1 = ell - m1
        residi = ell - mi
        g_m0 = (groups.sum_c - groups.n_c1 * m0) / s2 - m0 / MEAN_PRIOR_VAR
        g_m1 = float((w * resid1).sum()) / s2 - m1 / MEAN_PRIOR_VAR
        g_mi = float(((1.0 - w) * residi).sum()) / s2 - mi / MEAN_PRIOR_VAR
        ss_c = groups.sumsq_c - 2.0 * m0 * groups.sum_c + groups.n_c1 * m0 * m0
        ss_t = float((w * resid1 * resid1).sum() + ((1.0 - w) * residi * residi).sum())
        g_s = (ss_c + ss_t) / s3 - (groups.n_c1 + groups.n_t1) / s - s
        return np.array([*grad_logits, g_m0, g_m1, g_mi, s * g_s + 1.0])

    def constrain(v: np.ndarray) -> dict[str, float]:
        pi, m0, m1, mi, s = split(v)
        return {
            "pi_a": float(pi[0]),
            "pi_i": float(pi[1]),
            "pi_n": float(pi[2]),
            "mu_a0": groups.unstandardize_mean(m0),
            "mu_a1": groups.unstandardize_mean(m1),
            "mu_i1": groups.unstandardize_mean(mi),
            "sigma": groups.unstandardize_sd(s),
        }

    def initial_point() -> np.ndarray:
        logits = simplex_to_unconstrained(shares0)
        # control-purchaser moments give (0, 1) on the standardized scale;
        # start the influenced mean below the treated mean to avoid the minor mode
        return np.array(
            [logits[0], logits[1], 0.0, groups.mean_t, groups.mean_t - 1.5 * groups.sd_t, 0.0]
        )

    return TargetDensity(
        dim=6,
        names=PS_PARAM_NAMES,
        logp=logp,
        grad=grad,
        constrain=constrain,
        initial_point=initial_point,
        coord_names=(
            "logit_share_a",
            "logit_share_i",
            "std_mu_a0",
            "std_mu_a1",
            "std_mu_i1",
            "log_sigma",
        ),
    )


def ps_ate_draws(draws: PosteriorDraws) -> tuple[np.ndarray, np.ndarray]:
    """Per-draw ATE on the log and currency scales.

    ate_log = pi_a * (mu_a1 - mu_a0) + pi_i * mu_i1 (never-buyers contribute
    exactly zero); the currency version maps each cell through the lognormal
    mean before weighting.
    """
    col = {name: draws.draws[:, :, i] for i, name in enumerate(draws.names)}
    for required in ("pi_a", "pi_i", "mu_a0", "mu_a1", "mu_i1", "sigma"):
        if required not in col:
            raise ValidationError(f"draws are missing {required!r}; not a strata-model fit")
    ate_log = col["pi_a"] * (col["mu_a1"] - col["mu_a0"]) + col["pi_i"] * col["mu_i1"]
    half_var = col["sigma"] ** 2 / 2.0
    gain_a = np.expm1(col["mu_a1"] + half_var) - np.expm1(col["mu_a0"] + half_var)
    ate_dollar = col["pi_a"] * gain_a + col["pi_i"] * np.expm1(col["mu_i1"] + half_var)
    return ate_log, ate_dollar
