"""Pre-randomization covariates built from panel history.

Two covariates are theoretically tied to stratum membership: responsiveness
(the gap between purchase rates in exposed and unexposed periods) and recency
(periods since the last purchase, a predictor of latent attrition). Both are
binarized for use as strata predictors. All computations are per-customer and
pure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import CustomerHistory, PanelHistory
from .errors import ValidationError


@dataclass(frozen=True)
class CustomerCovariates:
    """Raw covariate values and their binarized flags for one customer.

    ``q`` is None when the customer has no exposed or no unexposed periods;
    ``r`` is None when there is no purchase in the window. Undefined values
    map conservatively onto the flags (treated as low responsiveness / no
    recent purchase).
    """

    q: float | None
    r: int | None
    no_recent_purchase: int
    low_responsiveness: int


def responsiveness(purchases: Sequence[int], exposures: Sequence[int]) -> float | None:
    """Purchase-rate difference between exposed and unexposed periods.

    Returns None (undefined) when the history has no exposed periods or no
    unexposed periods.
    """
    y = np.asarray(purchases, dtype=np.float64)
    z = np.asarray(exposures, dtype=np.float64)
    if y.size == 0:
        raise ValidationError("responsiveness needs a non-empty history")
    if y.shape != z.shape:
        raise ValidationError("purchase and exposure histories must have equal length")
    n_exposed = z.sum()
    n_unexposed = z.size - n_exposed
    if n_exposed == 0 or n_unexposed == 0:
        return None
    return float((y * z).sum() / n_exposed - (y * (1.0 - z)).sum() / n_unexposed)


def recency(purchases: Sequence[int], T: int) -> int | None:
    """Periods since the last purchase, counting the most recent period as 1.

    ``purchases`` is indexed so that its last element is period T. A purchase
    in period T gives r = 1; no purchase in the window returns None.
    """
    y = np.asarray(purchases, dtype=np.int8)
    if T < 1 or y.size == 0 or y.size > T:
        raise ValidationError(f"history of length {y.size} does not fit a window of T={T}")
    hits = np.flatnonzero(y)
    if hits.size == 0:
        return None
    # last element of the history is period T regardless of where it starts
    t_last = T - (y.size - 1 - int(hits[-1]))
    return T + 1 - t_last


def recency_pmf(k: int, pi: float, T: int) -> float:
    """P(recency = k) for a per-period purchase probability pi over T periods.

    Geometric waiting time truncated to the window: pi * (1-pi)^(k-1) /
    (1 - (1-pi)^T), supported on k = 1..T.
    """
    if not 0.0 < pi < 1.0:
        raise ValidationError(f"pi must be in (0, 1), got {pi}")
    if T < 1:
        raise ValidationError(f"T must be >= 1, got {T}")
    if not 1 <= k <= T:
        raise ValidationError(f"k must be in [1, {T}], got {k}")
    return pi * (1.0 - pi) ** (k - 1) / (1.0 - (1.0 - pi) ** T)


def expected_recency(pi: float, T: int) -> float:
    """Expectation of the truncated-geometric recency distribution.

    Closed form 1/pi - T*(1-pi)^T / (1 - (1-pi)^T), which equals the direct
    sum over :func:`recency_pmf` and is strictly decreasing in pi for T >= 2.
    An alternative closed form sometimes quoted for this distribution,
    T/((1-pi)^T - 1) + 1/pi + T - 1, evaluates exactly one below the pmf's
    expectation (e.g. 1/3 instead of 4/3 at pi=0.5, T=2); this function
    returns the pmf-consistent value.
    """
    if not 0.0 < pi < 1.0:
        raise ValidationError(f"pi must be in (0, 1), got {pi}")
    if T < 1:
        raise ValidationError(f"T must be >= 1, got {T}")
    decay = (1.0 - pi) ** T
    return 1.0 / pi - T * decay / (1.0 - decay)


def _covariates_for(history: CustomerHistory, T: int, r_threshold: int) -> CustomerCovariates:
    q = responsiveness(history.purchases, history.exposures)
    r = recency(history.purchases, T) if len(history) else None
    return CustomerCovariates(
        q=q,
        r=r,
        no_recent_purchase=int(r is None or r > r_threshold),
        low_responsiveness=int(q is None or q < 0),
    )


def build_covariates(panel: PanelHistory, r_threshold: int = 5) -> dict[str, CustomerCovariates]:
    """Compute covariates and flags for every customer in the panel.

    ``r_threshold`` sets the no-recent-purchase split (flag is 1 when r
    exceeds it or no purchase was observed).
    """
    if len(panel) == 0 or panel.T == 0:
        raise ValidationError("panel is empty: covariates are undefined")
    if r_threshold < 1:
        raise ValidationError(f"r_threshold must be >= 1, got {r_threshold}")
    return {
        cid: _covariates_for(history, panel.T, r_threshold)
        for cid, history in panel.customers.items()
    }


@dataclass(frozen=True)
class JoinReport:
    """Overlap between an experiment's customers and a covariate table."""

    matched: int
    experiment_only: tuple[str, ...]
    panel_only_count: int

    def to_dict(self) -> dict:
        return {
            "matched": self.matched,
            "experiment_only_count": len(self.experiment_only),
            "experiment_only_sample": list(self.experiment_only[:20]),
            "panel_only_count": self.panel_only_count,
        }


def join_report(
    experiment_ids: Sequence[str], covariates: Mapping[str, CustomerCovariates]
) -> JoinReport:
    """Report experiment customers that have no panel history (never dropped silently)."""
    missing = tuple(cid for cid in experiment_ids if cid not in covariates)
    matched = len(experiment_ids) - len(missing)
    return JoinReport(
        matched=matched,
        experiment_only=missing,
        panel_only_count=len(covariates) - matched,
    )


def write_covariates_csv(covariates: Mapping[str, CustomerCovariates], path: str | Path) -> None:
    """Write the per-customer covariate table; undefined q/r become empty fields."""
    with open(Path(path), "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["customer_id", "q", "r", "no_recent_purchase", "low_responsiveness"])
        for cid in sorted(covariates):
            c = covariates[cid]
            writer.writerow(
                [
                    cid,
                    "" if c.q is None else repr(c.q),
                    "" if c.r is None else c.r,
                    c.no_recent_purchase,
                    c.low_responsiveness,
                ]
            )
