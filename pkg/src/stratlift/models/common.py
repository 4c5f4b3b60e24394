"""Shared pieces for the model posteriors.

All posteriors run on internally standardized log outcomes: positive
log(y+1) values are centered and scaled by the control-purchaser moments
(the diff-in-means model standardizes over the full sample instead, since it
models zeros too). Reported parameters and ATEs are back-transformed to the
original log scale. Likelihoods aggregate by sufficient statistics wherever
the model allows; only the treated-purchaser mixture needs individual values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..data import ExperimentDataset
from ..errors import IdentificationError

LOG_2PI = math.log(2.0 * math.pi)

#: variance of the N(0, 20) prior on standardized cell means
MEAN_PRIOR_VAR = 400.0


@dataclass(frozen=True)
class OutcomeGroups:
    """Counts, sufficient statistics and standardized positives per observation group."""

    n: int
    n1: int
    n0: int
    n_t1: int  # treated purchasers
    n_t0: int  # treated non-purchasers
    n_c1: int  # control purchasers
    n_c0: int  # control non-purchasers
    center: float
    scale: float
    sum_c: float  # sum of standardized control-purchaser log outcomes
    sumsq_c: float
    sum_t: float
    sumsq_t: float
    ell_t: np.ndarray  # standardized treated-purchaser log outcomes
    mean_t: float  # of ell_t
    sd_t: float

    def unstandardize_mean(self, m: float) -> float:
        return self.center + self.scale * m

    def unstandardize_sd(self, s: float) -> float:
        return self.scale * s


def group_outcomes(data: ExperimentDataset) -> OutcomeGroups:
    """Split a dataset into the four observation groups and standardize.

    Requires at least one purchaser per arm: without control purchasers the
    always-buy control mean and the response sd are unidentified.
    """
    treated = data.z == 1
    bought = data.y > 0
    ell = np.log1p(data.y)
    ell_c = ell[~treated & bought]
    ell_t = ell[treated & bought]
    if ell_c.size == 0:
        raise IdentificationError(
            "no control purchasers: the control purchase mean and response sd "
            "cannot be identified"
        )
    if ell_t.size == 0:
        raise IdentificationError("no treated purchasers: the purchase model is degenerate")
    center = float(ell_c.mean())
    scale = float(ell_c.std(ddof=1)) if ell_c.size > 1 else 1.0
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    zc = (ell_c - center) / scale
    zt = (ell_t - center) / scale
    zt.setflags(write=False)
    return OutcomeGroups(
        n=len(data),
        n1=data.n1,
        n0=data.n0,
        n_t1=int(ell_t.size),
        n_t0=int(data.n1 - ell_t.size),
        n_c1=int(ell_c.size),
        n_c0=int(data.n0 - ell_c.size),
        center=center,
        scale=scale,
        sum_c=float(zc.sum()),
        sumsq_c=float((zc * zc).sum()),
        sum_t=float(zt.sum()),
        sumsq_t=float((zt * zt).sum()),
        ell_t=zt,
        mean_t=float(zt.mean()),
        sd_t=float(zt.std(ddof=1)) if zt.size > 1 else 1.0,
    )


def normal_suffstat_loglik(n: int, total: float, total_sq: float, mean: float, sd: float) -> float:
    """Sum of normal log densities given (count, sum, sum of squares)."""
    if n == 0:
        return 0.0
    ss = total_sq - 2.0 * mean * total + n * mean * mean
    return -n * (math.log(sd) + 0.5 * LOG_2PI) - ss / (2.0 * sd * sd)


def normal_logpdf(x: np.ndarray, mean: float, sd: float) -> np.ndarray:
    return -math.log(sd) - 0.5 * LOG_2PI - (x - mean) ** 2 / (2.0 * sd * sd)


def plugin_shares(data: ExperimentDataset, floor: float = 1e-4) -> np.ndarray:
    """Strata shares from arm incidences, floored away from the simplex boundary."""
    treated = data.z == 1
    bought = data.y > 0
    pi_a = float(bought[~treated].mean())
    pi_i = float(bought[treated].mean()) - pi_a
    shares = np.array([pi_a, pi_i, 1.0 - pi_a - max(pi_i, 0.0)])
    shares = np.clip(shares, floor, None)
    return shares / shares.sum()
