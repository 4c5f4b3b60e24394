"""Pre-model plug-in diagnostics for holdout experiments.

Everything here is computable from simple averages before fitting any model:
strata-share estimators, conservative bounds on the treated purchase means,
the benefit condition for post-stratification, the exact and lower-bound
variance gains, dollar-scale helpers, and the ROI sample-size calculator.
All functions are pure and safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .data import ExperimentDataset
from .errors import ValidationError


@dataclass(frozen=True)
class StrataProportions:
    """Plug-in strata shares (always-buy, influenced, never-buy).

    ``raw_pi_i`` keeps the signed treated-minus-control incidence difference;
    ``pi_i`` clamps it at 0 because the model rules out a negative incidence
    response, and ``pi_n`` absorbs the remainder so the shares sum to 1.
    """

    pi_a: float
    pi_i: float
    pi_n: float
    raw_pi_i: float

    def __post_init__(self) -> None:
        for name, p in (("pi_a", self.pi_a), ("pi_i", self.pi_i), ("pi_n", self.pi_n)):
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {p}")
        if abs(self.pi_a + self.pi_i + self.pi_n - 1.0) > 1e-12:
            raise ValidationError("strata proportions must sum to 1")


def estimate_strata_proportions(data: ExperimentDataset) -> StrataProportions:
    """Consistent strata-share estimators from arm purchase incidences.

    pi_a is the control incidence (every control purchaser always buys);
    raw_pi_i is treated incidence minus control incidence.
    """
    treated = data.z == 1
    if not treated.any() or treated.all():
        raise ValidationError("strata estimation needs both arms non-empty")
    bought = data.y > 0
    pi_a = float(bought[~treated].mean())
    raw_pi_i = float(bought[treated].mean()) - pi_a
    pi_i = max(raw_pi_i, 0.0)
    return StrataProportions(pi_a=pi_a, pi_i=pi_i, pi_n=1.0 - pi_a - pi_i, raw_pi_i=raw_pi_i)


def bounding_means(data: ExperimentDataset, pi_a: float) -> tuple[float, float]:
    """Conservative bounds on the treated-arm purchase means of log(y+1).

    Sorting the positive treated log outcomes ascending, the average of the
    lowest floor(n1 * pi_a) values is a lower bound for the always-buy mean
    (mu_a1_min) and the average of the rest is an upper bound for the
    influenced mean (mu_i1_max). Boundary cases: when the cut index is 0 the
    pair is (0, mean of all positives); when it reaches every positive value
    the pair is (mean of all positives, 0).
    """
    if not 0.0 <= pi_a <= 1.0:
        raise ValidationError(f"pi_a must be in [0, 1], got {pi_a}")
    treated = data.z == 1
    positives = data.y[treated & (data.y > 0)]
    if positives.size == 0:
        raise ValidationError("no treated purchasers: bounding means are undefined")
    ell = np.sort(np.log1p(positives))
    k = math.floor(int(treated.sum()) * pi_a)
    if k <= 0:
        return 0.0, float(ell.mean())
    if k >= ell.size:
        return float(ell.mean()), 0.0
    return float(ell[:k].mean()), float(ell[k:].mean())


def benefit_condition(mu_a1_min: float, mu_i1_max: float, proportions: StrataProportions) -> bool:
    """True when post-stratification is expected to reduce the ATE variance.

    The check is mu_a1_min / mu_i1_max > pi_i / (pi_i + pi_n); a zero
    mu_i1_max with a positive mu_a1_min passes trivially.
    """
    denom = proportions.pi_i + proportions.pi_n
    rhs = proportions.pi_i / denom if denom > 0 else 0.0
    if mu_i1_max <= 0.0:
        return mu_a1_min > 0.0
    return mu_a1_min / mu_i1_max > rhs


def stratification_variance_gain(
    pi_a: float, pi_i: float, mu_a0: float, mu_a1: float, mu_i1: float, n: int
) -> float:
    """Exact reduction in sampling variance from known-strata post-stratification.

    Equal-allocation closed form: 4 * pi_a * mu_a0 * ((1 - pi_a) * mu_a1 -
    pi_i * mu_i1) / n. Positive exactly when the benefit condition holds.
    """
    if n <= 0:
        raise ValidationError(f"n must be positive, got {n}")
    return 4.0 * pi_a * mu_a0 * ((1.0 - pi_a) * mu_a1 - pi_i * mu_i1) / n


def stratification_gain_lower_bound(
    proportions: StrataProportions,
    mu_a0_hat: float,
    mu_a1_min: float,
    mu_i1_max: float,
    n: int,
) -> float:
    """Conservative variance-gain estimate from the bounding means.

    Substitutes the computable bounds (mu_a1_min, mu_i1_max) into the exact
    gain formula, so it never exceeds the gain evaluated at the true treated
    means. Uses the clamped pi_i.
    """
    return stratification_variance_gain(
        proportions.pi_a, proportions.pi_i, mu_a0_hat, mu_a1_min, mu_i1_max, n
    )


def expected_lognormal_mean(mu: float, sigma: float) -> float:
    """Currency-scale mean exp(mu + sigma^2 / 2) - 1 implied by a log-scale cell."""
    if sigma < 0:
        raise ValidationError(f"sigma must be >= 0, got {sigma}")
    return math.exp(mu + sigma * sigma / 2.0) - 1.0


@dataclass(frozen=True)
class DiagnosticsReport:
    """Everything an analyst can check before fitting the model."""

    proportions: StrataProportions
    mu_a0_hat: float
    mu_a1_min: float
    mu_i1_max: float
    benefit: bool
    delta_min: float
    var_tau_d: float
    predicted_var_reduction_lb: float
    n: int
    n1: int
    n0: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "n1": self.n1,
            "n0": self.n0,
            "pi_a": self.proportions.pi_a,
            "pi_i": self.proportions.pi_i,
            "pi_n": self.proportions.pi_n,
            "raw_pi_i": self.proportions.raw_pi_i,
            "mu_a0_hat": self.mu_a0_hat,
            "mu_a1_min": self.mu_a1_min,
            "mu_i1_max": self.mu_i1_max,
            "benefit_condition": self.benefit,
            "delta_min": self.delta_min,
            "var_tau_d": self.var_tau_d,
            "predicted_var_reduction_lb": self.predicted_var_reduction_lb,
        }


def diagnostics_report(data: ExperimentDataset) -> DiagnosticsReport:
    """Run the full pre-model diagnostic battery on a dataset."""
    props = estimate_strata_proportions(data)
    mu_a1_min, mu_i1_max = bounding_means(data, props.pi_a)
    control_pos = data.y[(data.z == 0) & (data.y > 0)]
    mu_a0_hat = float(np.log1p(control_pos).mean()) if control_pos.size else 0.0
    ell = data.log1p_outcomes()
    treated = data.z == 1
    # sampling variance of the diff-in-means estimate at the observed allocation
    v1 = float(ell[treated].var(ddof=1)) if data.n1 > 1 else 0.0
    v0 = float(ell[~treated].var(ddof=1)) if data.n0 > 1 else 0.0
    var_tau_d = v1 / data.n1 + v0 / data.n0
    delta_min = stratification_gain_lower_bound(props, mu_a0_hat, mu_a1_min, mu_i1_max, len(data))
    return DiagnosticsReport(
        proportions=props,
        mu_a0_hat=mu_a0_hat,
        mu_a1_min=mu_a1_min,
        mu_i1_max=mu_i1_max,
        benefit=benefit_condition(mu_a1_min, mu_i1_max, props),
        delta_min=delta_min,
        var_tau_d=var_tau_d,
        predicted_var_reduction_lb=(delta_min / var_tau_d) if var_tau_d > 0 else 0.0,
        n=len(data),
        n1=data.n1,
        n0=data.n0,
    )


# --- ROI sample-size calculator ----------------------------------------------


@dataclass(frozen=True)
class PowerSpec:
    """Design inputs for the ROI holdout sizing question.

    ``outcome_sd`` is the per-unit standard deviation of log(y+1); the search
    can be run against a different per-unit variance (e.g. the strata-model
    one) via the ``var_tau`` argument of :func:`required_control_size`.
    """

    total_n: int
    cost_per_unit: float
    roi_null: float
    roi_alt: float
    power: float
    alpha: float
    mean_sales: float
    outcome_sd: float

    def __post_init__(self) -> None:
        if not 0.0 < self.power < 1.0:
            raise ValidationError(f"power must be in (0, 1), got {self.power}")
        if not 0.0 < self.alpha < 0.5:
            raise ValidationError(f"one-sided alpha must be in (0, 0.5), got {self.alpha}")
        if self.total_n < 2:
            raise ValidationError("total_n must be at least 2")

    def log_scale_effect(self) -> float:
        """ROI gap translated to a log-scale mean shift.

        The null-hypothesis cost c*(1+roi_null) is netted out of the treated
        arm mean, so the detectable shift is log(1 + mean_sales +
        c*(roi_alt - roi_null)) - log(1 + mean_sales).
        """
        lift = self.cost_per_unit * (self.roi_alt - self.roi_null)
        return math.log1p(self.mean_sales + lift) - math.log1p(self.mean_sales)


@dataclass(frozen=True)
class SampleSizeResult:
    """Outcome of the control-group sizing search."""

    feasible: bool
    required_n0: int | None
    achieved_power: float
    effect_log: float
    var_tau: float


def _power_at(n0: int, total_n: int, effect: float, var_tau: float, alpha: float) -> float:
    se = math.sqrt(var_tau / n0 + var_tau / (total_n - n0))
    return float(norm.cdf(effect / se - norm.ppf(1.0 - alpha)))


def required_control_size(spec: PowerSpec, var_tau: float | None = None) -> SampleSizeResult:
    """Smallest control-group size meeting the ROI test's power target.

    One-sided normal-approximation test of roi_null against roi_alt with the
    total experiment size fixed: the treated arm gets total_n - n0 units and
    both arm variances are var_tau over the arm size. Searches by integer
    bisection on the increasing branch (n0 <= total_n / 2); if even the
    midpoint allocation cannot reach the target the design is infeasible.
    """
    if spec.roi_alt <= spec.roi_null:
        return SampleSizeResult(False, None, 0.0, 0.0, var_tau or spec.outcome_sd**2)
    v = spec.outcome_sd**2 if var_tau is None else var_tau
    if v <= 0:
        raise ValidationError("var_tau must be positive")
    effect = spec.log_scale_effect()
    hi = spec.total_n // 2
    best = _power_at(hi, spec.total_n, effect, v, spec.alpha)
    if best < spec.power:
        return SampleSizeResult(False, None, best, effect, v)
    lo = 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _power_at(mid, spec.total_n, effect, v, spec.alpha) >= spec.power:
            hi = mid
        else:
            lo = mid + 1
    return SampleSizeResult(True, hi, _power_at(hi, spec.total_n, effect, v, spec.alpha), effect, v)
