"""Principal stratification with covariate-dependent strata probabilities.

A multinomial logit maps each customer's pre-randomization flags to strata
probabilities (always-buy is the base category with coefficients fixed at
zero): (pi_a, pi_i, pi_n | x) proportional to (1, exp(x b_i), exp(x b_n)).
Those per-customer probabilities replace the global simplex inside the
four-group marginal likelihood. Customers are grouped by distinct covariate
pattern, so likelihood cost stays O(#treated purchasers + #patterns).
The reported ATE averages the strata probabilities over the empirical
covariate distribution of the full dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..data import ExperimentDataset
from ..errors import ValidationError
from ..inference.hmc import PosteriorDraws
from ..inference.target import TargetDensity
from .common import MEAN_PRIOR_VAR, group_outcomes, normal_logpdf, plugin_shares


@dataclass(frozen=True)
class CovStrataParams:
    """Logit coefficients (intercept first) plus the response cells."""

    beta_i: tuple[float, ...]
    beta_n: tuple[float, ...]
    mu_a0: float
    mu_a1: float
    mu_i1: float
    sigma: float

    def __post_init__(self) -> None:
        if len(self.beta_i) != len(self.beta_n):
            raise ValidationError("beta_i and beta_n must have equal length")
        if self.sigma <= 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")


def mnl_strata_probs(beta_i, beta_n, x) -> np.ndarray:
    """Strata probabilities (pi_a, pi_i, pi_n) for one covariate vector.

    ``x`` must carry a leading 1 for the intercept. Computed via
    log-sum-exp; zero coefficient vectors give the uniform simplex.
    """
    bi = np.asarray(beta_i, dtype=np.float64)
    bn = np.asarray(beta_n, dtype=np.float64)
    xv = np.asarray(x, dtype=np.float64)
    if bi.shape != bn.shape or bi.shape != xv.shape:
        raise ValidationError(
            f"dimension mismatch: beta_i {bi.shape}, beta_n {bn.shape}, x {xv.shape}"
        )
    logits = np.array([0.0, float(xv @ bi), float(xv @ bn)])
    logits -= logits.max()
    expd = np.exp(logits)
    return expd / expd.sum()


def _cell_layout(data: ExperimentDataset, covariate_names):
    """Group records by distinct covariate pattern."""
    x = data.covariate_matrix(covariate_names)
    cells, inverse = np.unique(x, axis=0, return_inverse=True)
    n_cells = cells.shape[0]
    treated = data.z == 1
    bought = data.y > 0

    def counts(mask) -> np.ndarray:
        return np.bincount(inverse[mask], minlength=n_cells).astype(np.float64)

    return {
        "cells": cells,
        "t0": counts(treated & ~bought),
        "t1": counts(treated & bought),
        "c1": counts(~treated & bought),
        "c0": counts(~treated & ~bought),
        "cell_of_treated_pos": inverse[treated & bought],
        "weights": np.bincount(inverse, minlength=n_cells).astype(np.float64) / len(data),
    }


def _log_softmax_rows(cells: np.ndarray, bi: np.ndarray, bn: np.ndarray):
    logits = np.column_stack([np.zeros(cells.shape[0]), cells @ bi, cells @ bn])
    m = logits.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True))
    log_pi = logits - lse
    return log_pi, np.exp(log_pi)


def psc_posterior(data: ExperimentDataset, covariate_names) -> TargetDensity:
    """Posterior for the covariate model as a target density.

    Unconstrained coordinates: the two coefficient vectors (intercept first),
    three standardized means, log sigma. Priors: N(0, 1) on every logit
    coefficient, N(0, 20) on standardized means, half-N(0, 1) on sigma.
    """
    covariate_names = list(covariate_names)
    groups = group_outcomes(data)
    layout = _cell_layout(data, covariate_names)
    cells = layout["cells"]
    p1 = cells.shape[1]
    ci = layout["cell_of_treated_pos"]
    t0, t1, c1, c0 = layout["t0"], layout["t1"], layout["c1"], layout["c0"]
    total = t0 + t1 + c1 + c0
    shares0 = plugin_shares(data)

    mean_slice = slice(2 * p1, 2 * p1 + 3)

    def split(v: np.ndarray):
        bi = v[:p1]
        bn = v[p1: 2 * p1]
        m0, m1, mi = v[mean_slice]
        return bi, bn, m0, m1, mi, math.exp(v[-1])

    def logp(v: np.ndarray) -> float:
        bi, bn, m0, m1, mi, s = split(v)
        log_pi, pi = _log_softmax_rows(cells, bi, bn)
        ll = float(
            (t0 * log_pi[:, 2]).sum()
            + (c1 * log_pi[:, 0]).sum()
            + (c0 * np.log1p(-pi[:, 0])).sum()
        )
        ll += -groups.n_c1 * (math.log(s) + 0.5 * math.log(2 * math.pi)) - (
            groups.sumsq_c - 2.0 * m0 * groups.sum_c + groups.n_c1 * m0 * m0
        ) / (2.0 * s * s)
        la = log_pi[ci, 0] + normal_logpdf(groups.ell_t, m1, s)
        li = log_pi[ci, 1] + normal_logpdf(groups.ell_t, mi, s)
        ll += float(np.logaddexp(la, li).sum())
        prior = -0.5 * float(bi @ bi + bn @ bn)
        prior += -(m0 * m0 + m1 * m1 + mi * mi) / (2.0 * MEAN_PRIOR_VAR)
        prior += -0.5 * s * s + v[-1]
        return ll + prior

    def grad(v: np.ndarray) -> np.ndarray:
        bi, bn, m0, m1, mi, s = split(v)
        log_pi, pi = _log_softmax_rows(cells, bi, bn)
        ell = groups.ell_t
        la = log_pi[ci, 0] + normal_logpdf(ell, m1, s)
        li = log_pi[ci, 1] + normal_logpdf(ell, mi, s)
        lse = np.logaddexp(la, li)
        w = np.exp(la - lse)
        s1w = t1 - np.bincount(ci, weights=w, minlength=cells.shape[0])

        not_a = pi[:, 1] + pi[:, 2]
        du_i = -pi[:, 1] * total + c0 * pi[:, 1] / not_a + s1w
        du_n = -pi[:, 2] * total + t0 + c0 * pi[:, 2] / not_a
        g_bi = cells.T @ du_i - bi
        g_bn = cells.T @ du_n - bn

        s2, s3 = s * s, s**3
        resid1 = ell - m1
        residi = ell - mi
        g_m0 = (groups.sum_c - groups.n_c1 * m0) / s2 - m0 / MEAN_PRIOR_VAR
        g_m1 = float((w * resid1).sum()) / s2 - m1 / MEAN_PRIOR_VAR
        g_mi = float(((1.0 - w) * residi).sum()) / s2 - mi / MEAN_PRIOR_VAR
        ss_c = groups.sumsq_c - 2.0 * m0 * groups.sum_c + groups.n_c1 * m0 * m0
        ss_t = float((w * resid1 * resid1).sum() + ((1.0 - w) * residi * residi).sum())
        g_s = (ss_c + ss_t) / s3 - (groups.n_c1 + groups.n_t1) / s - s
        return np.concatenate([g_bi, g_bn, [g_m0, g_m1, g_mi, s * g_s + 1.0]])

    beta_names = tuple(f"beta_i_{j}" for j in range(p1)) + tuple(f"beta_n_{j}" for j in range(p1))
    names = beta_names + ("mu_a0", "mu_a1", "mu_i1", "sigma")

    def constrain(v: np.ndarray) -> dict[str, float]:
        bi, bn, m0, m1, mi, s = split(v)
        out = {f"beta_i_{j}": float(bi[j]) for j in range(p1)}
        out.update({f"beta_n_{j}": float(bn[j]) for j in range(p1)})
        out.update(
            {
                "mu_a0": groups.unstandardize_mean(m0),
                "mu_a1": groups.unstandardize_mean(m1),
                "mu_i1": groups.unstandardize_mean(mi),
                "sigma": groups.unstandardize_sd(s),
            }
        )
        return out

    def initial_point() -> np.ndarray:
        v0 = np.zeros(2 * p1 + 4)
        v0[0] = math.log(shares0[1] / shares0[0])
        v0[p1] = math.log(shares0[2] / shares0[0])
        v0[2 * p1 + 1] = groups.mean_t
        v0[2 * p1 + 2] = groups.mean_t - 1.5 * groups.sd_t
        return v0

    coord_names = tuple(f"beta_i[{j}]" for j in range(p1)) + tuple(
        f"beta_n[{j}]" for j in range(p1)
    ) + ("std_mu_a0", "std_mu_a1", "std_mu_i1", "log_sigma")
    return TargetDensity(
        dim=2 * p1 + 4,
        names=names,
        logp=logp,
        grad=grad,
        constrain=constrain,
        initial_point=initial_point,
        coord_names=coord_names,
    )


def psc_ate_draws(
    draws: PosteriorDraws, data: ExperimentDataset, covariate_names
) -> dict[str, np.ndarray]:
    """Per-draw ATE and population-average strata shares for a covariate fit.

    Shares are averaged over the empirical covariate distribution of the
    full dataset (both arms), then combined exactly as in the no-covariate
    model: ate_log = pi_a_avg * (mu_a1 - mu_a0) + pi_i_avg * mu_i1.
    """
    layout = _cell_layout(data, list(covariate_names))
    cells, weights = layout["cells"], layout["weights"]
    p1 = cells.shape[1]
    col = {name: draws.draws[:, :, i] for i, name in enumerate(draws.names)}
    bi = np.stack([col[f"beta_i_{j}"] for j in range(p1)], axis=-1)
    bn = np.stack([col[f"beta_n_{j}"] for j in range(p1)], axis=-1)
    u_i = np.einsum("...p,cp->...c", bi, cells)
    u_n = np.einsum("...p,cp->...c", bn, cells)
    logits = np.stack([np.zeros_like(u_i), u_i, u_n], axis=-1)
    logits -= logits.max(axis=-1, keepdims=True)
    pi = np.exp(logits)
    pi /= pi.sum(axis=-1, keepdims=True)
    pi_avg = np.einsum("...cs,c->...s", pi, weights)

    half_var = col["sigma"] ** 2 / 2.0
    gain_a = np.expm1(col["mu_a1"] + half_var) - np.expm1(col["mu_a0"] + half_var)
    return {
        "pi_a_avg": pi_avg[..., 0],
        "pi_i_avg": pi_avg[..., 1],
        "pi_n_avg": pi_avg[..., 2],
        "ate_log": pi_avg[..., 0] * (col["mu_a1"] - col["mu_a0"]) + pi_avg[..., 1] * col["mu_i1"],
        "ate_dollar": pi_avg[..., 0] * gain_a + pi_avg[..., 1] * np.expm1(col["mu_i1"] + half_var),
    }
