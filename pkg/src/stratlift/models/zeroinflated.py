"""Zero-inflated normal benchmark, with an optional positive-lift constraint.

Each arm mixes a point mass at zero with a normal on log(y+1): purchase with
probability q0 (control) / q1 (treated), spend centered at alpha / beta with
a shared sigma. The ATE is q1 * beta - q0 * alpha. The constrained variant
reparameterizes q1 = q0 + (1 - q0) * u with u in (0, 1), so every posterior
draw satisfies q1 >= q0 by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..data import ExperimentDataset
from ..errors import ValidationError
from ..inference.hmc import PosteriorDraws
from ..inference.target import TargetDensity
from .common import MEAN_PRIOR_VAR, group_outcomes, normal_suffstat_loglik

ZI_PARAM_NAMES = ("q0", "q1", "alpha", "beta", "sigma")


@dataclass(frozen=True)
class ZeroInflatedParams:
    """Arm-wise incidence probabilities and log-scale spend means."""

    q0: float
    q1: float
    alpha: float
    beta: float
    sigma: float
    constrained: bool = False

    def __post_init__(self) -> None:
        for name, q in (("q0", self.q0), ("q1", self.q1)):
            if not 0.0 < q < 1.0:
                raise ValidationError(f"{name} must be in (0, 1), got {q}")
        if self.sigma <= 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if self.constrained and self.q1 < self.q0:
            raise ValidationError("constrained variant requires q1 >= q0")

    def ate_log(self) -> float:
        return self.q1 * self.beta - self.q0 * self.alpha


def _logit(p: float) -> float:
    return math.log(p) - math.log1p(-p)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def zi_posterior(data: ExperimentDataset, constrained: bool = False) -> TargetDensity:
    """Posterior for the zero-inflated benchmark as a target density.

    Likelihood needs only counts and per-arm sufficient statistics of the
    positive log outcomes. Priors: Beta(2,2) on incidence probabilities
    (uniform on the lift fraction u in the constrained variant), N(0, 20) on
    standardized means, half-N(0, 1) on the standardized sigma.
    """
    groups = group_outcomes(data)
    q0_init = min(max(groups.n_c1 / groups.n0, 1e-6), 1.0 - 1e-6)
    q1_init = min(max(groups.n_t1 / groups.n1, 1e-6), 1.0 - 1e-6)

    def split(v: np.ndarray):
        q0 = _sigmoid(v[0])
        if constrained:
            u = _sigmoid(v[1])
            q1 = q0 + (1.0 - q0) * u
        else:
            u = None
            q1 = _sigmoid(v[1])
        return q0, q1, u, v[2], v[3], math.exp(v[4])

    def _normals(a: float, b: float, s: float) -> float:
        return normal_suffstat_loglik(
            groups.n_c1, groups.sum_c, groups.sumsq_c, a, s
        ) + normal_suffstat_loglik(groups.n_t1, groups.sum_t, groups.sumsq_t, b, s)

    def logp(v: np.ndarray) -> float:
        q0, q1, u, a, b, s = split(v)
        ll = (
            groups.n_c1 * math.log(q0)
            + groups.n_c0 * math.log1p(-q0)
            + groups.n_t1 * math.log(q1)
            + groups.n_t0 * math.log1p(-q1)
            + _normals(a, b, s)
        )
        # Beta(2,2) kernel plus logit Jacobian on q0 (and q1 when unconstrained)
        prior = 2.0 * (math.log(q0) + math.log1p(-q0))
        if constrained:
            prior += math.log(u) + math.log1p(-u)  # Jacobian of the lift fraction
        else:
            prior += 2.0 * (math.log(q1) + math.log1p(-q1))
        prior += -(a * a + b * b) / (2.0 * MEAN_PRIOR_VAR)
        prior += -0.5 * s * s + v[4]
        return ll + prior

    def grad(v: np.ndarray) -> np.ndarray:
        q0, q1, u, a, b, s = split(v)
        if constrained:
            d_q0 = (
                (groups.n_c1 + 2.0) / q0
                - (groups.n_c0 + 2.0) / (1.0 - q0)
                + groups.n_t1 * (1.0 - u) / q1
                - groups.n_t0 / (1.0 - q0)
            )
            g0 = q0 * (1.0 - q0) * d_q0
            d_u = groups.n_t1 * (1.0 - q0) / q1 - groups.n_t0 / (1.0 - u) + 1.0 / u - 1.0 / (1.0 - u)
            g1 = u * (1.0 - u) * d_u
        else:
            g0 = (groups.n_c1 + 2.0) * (1.0 - q0) - (groups.n_c0 + 2.0) * q0
            g1 = (groups.n_t1 + 2.0) * (1.0 - q1) - (groups.n_t0 + 2.0) * q1
        s2, s3 = s * s, s**3
        g_a = (groups.sum_c - groups.n_c1 * a) / s2 - a / MEAN_PRIOR_VAR
        g_b = (groups.sum_t - groups.n_t1 * b) / s2 - b / MEAN_PRIOR_VAR
        ss_c = groups.sumsq_c - 2.0 * a * groups.sum_c + groups.n_c1 * a * a
        ss_t = groups.sumsq_t - 2.0 * b * groups.sum_t + groups.n_t1 * b * b
        g_s = (ss_c + ss_t) / s3 - (groups.n_c1 + groups.n_t1) / s - s
        return np.array([g0, g1, g_a, g_b, s * g_s + 1.0])

    def constrain(v: np.ndarray) -> dict[str, float]:
        q0, q1, _, a, b, s = split(v)
        return {
            "q0": q0,
            "q1": q1,
            "alpha": groups.unstandardize_mean(a),
            "beta": groups.unstandardize_mean(b),
            "sigma": groups.unstandardize_sd(s),
        }

    def initial_point() -> np.ndarray:
        if constrained:
            lift = min(max((q1_init - q0_init) / (1.0 - q0_init), 1e-6), 1.0 - 1e-6)
            second = _logit(lift)
        else:
            second = _logit(q1_init)
        return np.array([_logit(q0_init), second, 0.0, groups.mean_t, 0.0])

    label = "logit_lift_fraction" if constrained else "logit_q1"
    return TargetDensity(
        dim=5,
        names=ZI_PARAM_NAMES,
        logp=logp,
        grad=grad,
        constrain=constrain,
        initial_point=initial_point,
        coord_names=("logit_q0", label, "std_alpha", "std_beta", "log_sigma"),
    )


def zi_ate_draws(draws: PosteriorDraws) -> np.ndarray:
    """Per-draw ATE q1 * beta - q0 * alpha on the log scale."""
    col = {name: draws.draws[:, :, i] for i, name in enumerate(draws.names)}
    return col["q1"] * col["beta"] - col["q0"] * col["alpha"]
