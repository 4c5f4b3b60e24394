"""MCMC convergence diagnostics and posterior summaries.

Split R-hat follows the classic between/within comparison on half-chains;
bulk ESS rank-normalizes, splits, and applies Geyer's initial monotone
sequence to the pooled autocovariances, matching the mainstream diagnostic
stack.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy import stats

from ..errors import ValidationError

if TYPE_CHECKING:  # pragma: no cover
    from .hmc import PosteriorDraws


def _split_chains(ary: np.ndarray) -> np.ndarray:
    """Split each chain in half and stack (drops the middle draw if odd)."""
    _, n = ary.shape
    half = n // 2
    return np.vstack((ary[:, :half], ary[:, n - half:]))


def split_rhat(ary: np.ndarray) -> float:
    """Split R-hat for a (chains, draws) array; NaN when chains are constant."""
    ary = _split_chains(np.asarray(ary, dtype=np.float64))
    _, n = ary.shape
    chain_mean = ary.mean(axis=1)
    within = ary.var(axis=1, ddof=1).mean()
    between = n * np.var(chain_mean, ddof=1)
    if not np.isfinite(within) or within <= 0.0:
        return float("nan")
    var_hat = (n - 1) / n * within + between / n
    return float(np.sqrt(var_hat / within))


def _z_scale(ary: np.ndarray) -> np.ndarray:
    rank = stats.rankdata(ary, method="average")
    z = stats.norm.ppf((rank - 0.5) / ary.size)
    return z.reshape(ary.shape)


def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.size
    x = x - x.mean()
    size = int(2 ** np.ceil(np.log2(2 * n)))
    fft = np.fft.rfft(x, size)
    acov = np.fft.irfft(fft * np.conj(fft), size)[:n].real
    return acov / n


def _ess(ary: np.ndarray) -> float:
    """Geyer initial-monotone-sequence ESS for a (chains, draws) array."""
    n_chain, n_draw = ary.shape
    acov = np.asarray([_autocov(ary[c]) for c in range(n_chain)])
    chain_mean = ary.mean(axis=1)
    mean_var = acov[:, 0].mean() * n_draw / (n_draw - 1.0)
    var_plus = mean_var * (n_draw - 1.0) / n_draw
    if n_chain > 1:
        var_plus += np.var(chain_mean, ddof=1)
    if not np.isfinite(var_plus) or var_plus <= 0.0:
        return float("nan")

    rho = np.zeros(n_draw)
    rho[0] = 1.0
    rho_even = 1.0
    rho_odd = 1.0 - (mean_var - acov[:, 1].mean()) / var_plus
    rho[1] = rho_odd
    t = 1
    while t < n_draw - 2 and (rho_even + rho_odd) >= 0.0:
        rho_even = 1.0 - (mean_var - acov[:, t + 1].mean()) / var_plus
        rho_odd = 1.0 - (mean_var - acov[:, t + 2].mean()) / var_plus
        rho[t + 1] = rho_even
        if (rho_even + rho_odd) >= 0.0:
            rho[t + 2] = rho_odd
        t += 2
    max_t = t
    # enforce monotonicity of successive pair sums
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0
            rho[t + 2] = rho[t + 1]
        t += 2
    tau = -1.0 + 2.0 * rho[:max_t].sum() + rho[max_t + 1: max_t + 2].sum()
    if not np.isfinite(tau) or tau <= 0.0:
        return float("nan")
    return float(n_chain * n_draw / tau)


def ess_bulk(ary: np.ndarray) -> float:
    """Bulk effective sample size (rank-normalized, split)."""
    ary = np.asarray(ary, dtype=np.float64)
    if np.ptp(ary) == 0.0:
        return float("nan")
    return _ess(_z_scale(_split_chains(ary)))


@dataclass(frozen=True)
class ConvergenceStat:
    rhat: float
    ess: float


@dataclass(frozen=True)
class SummaryStat:
    mean: float
    sd: float
    q2_5: float
    q97_5: float


def convergence(draws: "PosteriorDraws") -> dict[str, ConvergenceStat]:
    """Split R-hat and bulk ESS for every parameter and derived quantity."""
    if draws.n_chains < 2:
        raise ValidationError("convergence diagnostics need at least 2 chains")
    if draws.n_iters < 100:
        raise ValidationError("convergence diagnostics need at least 100 draws per chain")
    return {
        name: ConvergenceStat(rhat=split_rhat(chains), ess=ess_bulk(chains))
        for name, chains in draws.items()
    }


def summarize_draws(draws: "PosteriorDraws") -> dict[str, SummaryStat]:
    """Pooled-across-chains mean, sd and central 95% interval per quantity."""
    if draws.n_iters == 0:
        raise ValidationError("cannot summarize empty draws")
    out = {}
    for name, chains in draws.items():
        flat = chains.reshape(-1)
        lo, hi = np.quantile(flat, [0.025, 0.975])
        out[name] = SummaryStat(
            mean=float(flat.mean()),
            sd=float(flat.std(ddof=1)) if flat.size > 1 else 0.0,
            q2_5=float(lo),
            q97_5=float(hi),
        )
    return out
