"""Bayesian difference-in-means baseline.

A plain normal regression of log(y+1) on the treatment flag with diffuse
priors; the posterior of the shift parameter tracks the frequentist
difference-in-means estimate. Likelihood reduces to per-arm sufficient
statistics over all records, zeros included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..data import ExperimentDataset
from ..errors import ValidationError
from ..inference.target import TargetDensity
from .common import MEAN_PRIOR_VAR, normal_suffstat_loglik

DIM_PARAM_NAMES = ("alpha", "tau_d", "sigma")


@dataclass(frozen=True)
class DiffMeansParams:
    alpha: float
    tau_d: float
    sigma: float

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")


def dim_posterior(data: ExperimentDataset) -> TargetDensity:
    """Posterior over (control level, treatment shift, residual sd)."""
    treated = data.z == 1
    if not treated.any() or treated.all():
        raise ValidationError("difference-in-means needs both arms non-empty")
    ell = data.log1p_outcomes()
    center = float(ell.mean())
    scale = float(ell.std(ddof=1)) if ell.size > 1 else 1.0
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    z1 = (ell[treated] - center) / scale
    z0 = (ell[~treated] - center) / scale
    n1, n0 = z1.size, z0.size
    s1, q1 = float(z1.sum()), float((z1 * z1).sum())
    s0, q0 = float(z0.sum()), float((z0 * z0).sum())
    a_init = s0 / n0
    t_init = s1 / n1 - a_init

    def logp(v: np.ndarray) -> float:
        a, t, s = v[0], v[1], math.exp(v[2])
        ll = normal_suffstat_loglik(n0, s0, q0, a, s) + normal_suffstat_loglik(
            n1, s1, q1, a + t, s
        )
        prior = -(a * a + t * t) / (2.0 * MEAN_PRIOR_VAR) - 0.5 * s * s + v[2]
        return ll + prior

    def grad(v: np.ndarray) -> np.ndarray:
        a, t, s = v[0], v[1], math.exp(v[2])
        s2, s3 = s * s, s**3
        resid0 = s0 - n0 * a
        resid1 = s1 - n1 * (a + t)
        g_a = (resid0 + resid1) / s2 - a / MEAN_PRIOR_VAR
        g_t = resid1 / s2 - t / MEAN_PRIOR_VAR
        ss0 = q0 - 2.0 * a * s0 + n0 * a * a
        ss1 = q1 - 2.0 * (a + t) * s1 + n1 * (a + t) ** 2
        g_s = (ss0 + ss1) / s3 - (n0 + n1) / s - s
        return np.array([g_a, g_t, s * g_s + 1.0])

    def constrain(v: np.ndarray) -> dict[str, float]:
        return {
            "alpha": center + scale * v[0],
            "tau_d": scale * v[1],
            "sigma": scale * math.exp(v[2]),
        }

    def initial_point() -> np.ndarray:
        return np.array([a_init, t_init, 0.0])

    return TargetDensity(
        dim=3,
        names=DIM_PARAM_NAMES,
        logp=logp,
        grad=grad,
        constrain=constrain,
        initial_point=initial_point,
        coord_names=("std_alpha", "std_tau", "log_sigma"),
    )
