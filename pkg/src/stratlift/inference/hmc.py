"""Hamiltonian Monte Carlo for the package's posteriors.

Plain leapfrog HMC with a jittered fixed leapfrog count, dual-averaging
step-size adaptation toward a target acceptance rate, and windowed diagonal
mass-matrix (posterior variance) estimation during warmup. Chains are
independent; each derives its own RNG stream from the seed, so results are
bit-reproducible and independent of scheduling. Set STRATLIFT_THREADS to run
chains concurrently.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from ..errors import StratliftError, ValidationError
from .target import TargetDensity

_DIVERGENCE_ENERGY = 1000.0
_JITTER_SCALE = 0.05


class SamplerError(StratliftError):
    """Sampling could not start or proceed (bad gradient, invalid config)."""


@dataclass(frozen=True)
class SamplerConfig:
    """Run-shape and adaptation settings for :func:`sample`."""

    chains: int = 4
    warmup_iters: int = 1000
    sampling_iters: int = 1000
    seed: int = 0
    target_accept: float = 0.8
    max_leapfrog: int = 16

    def __post_init__(self) -> None:
        if self.chains < 2:
            raise ValidationError("at least 2 chains are required for convergence diagnostics")
        if not 0.5 < self.target_accept < 0.99:
            raise ValidationError(f"target_accept must be in (0.5, 0.99), got {self.target_accept}")
        if self.sampling_iters < 1 or self.warmup_iters < 0:
            raise ValidationError("iteration counts must be positive")
        if self.max_leapfrog < 1:
            raise ValidationError("max_leapfrog must be >= 1")


@dataclass(frozen=True)
class PosteriorDraws:
    """Post-warmup draws on the constrained scale plus derived quantities.

    ``draws`` has shape (chains, iters, params) ordered by ``names``;
    ``derived`` maps quantity names to (chains, iters) arrays.
    """

    names: tuple[str, ...]
    draws: np.ndarray
    derived: Mapping[str, np.ndarray] = field(default_factory=dict)
    accept_rate: tuple[float, ...] = ()
    step_size: tuple[float, ...] = ()
    divergences: tuple[int, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.draws.ndim != 3 or self.draws.shape[2] != len(self.names):
            raise ValidationError("draws must have shape (chains, iters, len(names))")
        if not np.isfinite(self.draws).all():
            raise ValidationError("draws contain non-finite values")
        for name, arr in dict(self.derived).items():
            if arr.shape != self.draws.shape[:2]:
                raise ValidationError(f"derived quantity {name!r} has mismatched shape")

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_iters(self) -> int:
        return self.draws.shape[1]

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        """(name, (chains, iters) array) pairs for parameters then derived."""
        for j, name in enumerate(self.names):
            yield name, self.draws[:, :, j]
        yield from self.derived.items()

    def column(self, name: str) -> np.ndarray:
        """Pooled draws of one parameter or derived quantity."""
        for key, chains in self.items():
            if key == name:
                return chains.reshape(-1)
        raise KeyError(name)

    def with_derived(self, **quantities: np.ndarray) -> "PosteriorDraws":
        merged = dict(self.derived)
        merged.update(quantities)
        return PosteriorDraws(
            names=self.names,
            draws=self.draws,
            derived=merged,
            accept_rate=self.accept_rate,
            step_size=self.step_size,
            divergences=self.divergences,
            warnings=self.warnings,
        )

    @property
    def divergence_rate(self) -> float:
        total = self.n_chains * self.n_iters
        return sum(self.divergences) / total if total else 0.0

    def to_csv(self, path: str | Path) -> None:
        """One row per draw; columns are parameters then derived quantities."""
        derived_names = list(self.derived)
        with open(Path(path), "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow([*self.names, *derived_names])
            for c in range(self.n_chains):
                for i in range(self.n_iters):
                    row = [repr(float(x)) for x in self.draws[c, i]]
                    row += [repr(float(self.derived[d][c, i])) for d in derived_names]
                    writer.writerow(row)


class _DualAveraging:
    """Nesterov dual averaging of log step size toward a target acceptance."""

    GAMMA = 0.05
    T0 = 10.0
    KAPPA = 0.75

    def __init__(self, eps0: float, target_accept: float) -> None:
        self.mu = math.log(10.0 * eps0)
        self.log_eps = math.log(eps0)
        self.log_eps_bar = 0.0
        self.h_bar = 0.0
        self.m = 0
        self.target = target_accept

    def update(self, accept_prob: float) -> None:
        self.m += 1
        frac = 1.0 / (self.m + self.T0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_prob)
        self.log_eps = self.mu - math.sqrt(self.m) / self.GAMMA * self.h_bar
        eta = self.m ** (-self.KAPPA)
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar

    @property
    def eps(self) -> float:
        return math.exp(self.log_eps)

    @property
    def eps_averaged(self) -> float:
        return math.exp(self.log_eps_bar)


class _Welford:
    """Running mean/variance of unconstrained draws within a warmup window."""

    def __init__(self, dim: int) -> None:
        self.n = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def add(self, x: np.ndarray) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def regularized_variance(self) -> np.ndarray:
        # shrink toward a small diagonal, as adaptive HMC implementations do
        if self.n < 2:
            return np.ones_like(self.mean)
        var = self.m2 / (self.n - 1)
        w = self.n / (self.n + 5.0)
        return w * var + (1.0 - w) * 1e-3


def _variance_windows(warmup: int) -> list[tuple[int, int]]:
    """[start, end) warmup intervals over which the mass matrix is estimated."""
    init_buf, term_buf, base = 75, 50, 25
    if warmup < init_buf + term_buf + base:
        init_buf = int(0.15 * warmup)
        term_buf = int(0.10 * warmup)
        if warmup - init_buf - term_buf < 10:
            return []
        return [(init_buf, warmup - term_buf)]
    windows = []
    start, size, limit = init_buf, base, warmup - term_buf
    while start < limit:
        end = min(start + size, limit)
        if limit - end < 2 * size:
            end = limit
        windows.append((start, end))
        start = end
        size *= 2
    return windows


def _leapfrog(
    target: TargetDensity,
    v: np.ndarray,
    p: np.ndarray,
    grad_v: np.ndarray,
    eps: float,
    steps: int,
    inv_mass: np.ndarray,
):
    """Leapfrog trajectory; returns (v, p, grad) or None on a non-finite state."""
    p = p + 0.5 * eps * grad_v
    g = grad_v
    for i in range(steps):
        v = v + eps * inv_mass * p
        g = target.grad(v)
        if not np.isfinite(g).all():
            return None
        p = p + (eps if i < steps - 1 else 0.5 * eps) * g
    return v, p, g


def _kinetic(p: np.ndarray, inv_mass: np.ndarray) -> float:
    return 0.5 * float(np.dot(p * p, inv_mass))


def _find_initial_step(
    target: TargetDensity,
    v: np.ndarray,
    logp_v: float,
    grad_v: np.ndarray,
    inv_mass: np.ndarray,
    rng: np.random.Generator,
) -> float:
    """Double/halve the step size until a single step's acceptance crosses 1/2."""
    eps = 1.0
    p = rng.standard_normal(v.size) / np.sqrt(inv_mass)
    h0 = -logp_v + _kinetic(p, inv_mass)

    def log_accept(eps_try: float) -> float:
        state = _leapfrog(target, v, p, grad_v, eps_try, 1, inv_mass)
        if state is None:
            return -np.inf
        v1, p1, _ = state
        lp = target.logp(v1)
        if not np.isfinite(lp):
            return -np.inf
        return min(0.0, h0 - (-lp + _kinetic(p1, inv_mass)))

    direction = 1.0 if log_accept(eps) > math.log(0.5) else -1.0
    for _ in range(60):
        if direction * log_accept(eps) <= direction * math.log(0.5):
            break
        eps *= 2.0**direction
        if not 1e-10 < eps < 1e10:
            break
    return eps


def _run_chain(
    target: TargetDensity, config: SamplerConfig, seed_seq: np.random.SeedSequence
) -> dict:
    rng = np.random.default_rng(seed_seq)
    dim = target.dim
    v = np.asarray(target.initial_point(), dtype=np.float64).copy()
    v += _JITTER_SCALE * rng.standard_normal(dim)
    logp_v = target.logp(v)
    grad_v = target.grad(v)
    if not np.isfinite(logp_v):
        raise SamplerError("non-finite log density at initialization")
    if not np.isfinite(grad_v).all():
        bad = int(np.flatnonzero(~np.isfinite(grad_v))[0])
        raise SamplerError(f"non-finite gradient at initialization for {target.coord_name(bad)}")

    inv_mass = np.ones(dim)
    eps = _find_initial_step(target, v, logp_v, grad_v, inv_mass, rng)
    adapt = _DualAveraging(eps, config.target_accept)
    windows = _variance_windows(config.warmup_iters)
    window_idx = 0
    welford = _Welford(dim)

    draws = np.empty((config.sampling_iters, dim))
    divergences = 0
    accept_sum = 0.0

    total = config.warmup_iters + config.sampling_iters
    for it in range(total):
        warm = it < config.warmup_iters
        steps = max(1, round(config.max_leapfrog * rng.uniform(0.8, 1.2)))
        p = rng.standard_normal(dim) / np.sqrt(inv_mass)
        h0 = -logp_v + _kinetic(p, inv_mass)
        state = _leapfrog(target, v, p, grad_v, eps, steps, inv_mass)
        divergent = False
        alpha = 0.0
        if state is not None:
            v_new, p_new, grad_new = state
            logp_new = target.logp(v_new)
            if np.isfinite(logp_new):
                h1 = -logp_new + _kinetic(p_new, inv_mass)
                delta = h0 - h1
                divergent = -delta > _DIVERGENCE_ENERGY
                alpha = min(1.0, math.exp(min(delta, 0.0)))
                if not divergent and rng.random() < alpha:
                    v, logp_v, grad_v = v_new, logp_new, grad_new
            else:
                divergent = True
        else:
            divergent = True

        if warm:
            adapt.update(alpha)
            eps = adapt.eps
            if window_idx < len(windows):
                start, end = windows[window_idx]
                if start <= it < end:
                    welford.add(v)
                if it == end - 1:
                    inv_mass = welford.regularized_variance()
                    welford = _Welford(dim)
                    window_idx += 1
                    eps = _find_initial_step(target, v, logp_v, grad_v, inv_mass, rng)
                    adapt = _DualAveraging(eps, config.target_accept)
            if it == config.warmup_iters - 1:
                eps = adapt.eps_averaged
        else:
            draws[it - config.warmup_iters] = v
            accept_sum += alpha
            divergences += int(divergent)

    return {
        "unconstrained": draws,
        "accept_rate": accept_sum / config.sampling_iters,
        "step_size": eps,
        "divergences": divergences,
    }


def _thread_count(chains: int) -> int:
    raw = os.environ.get("STRATLIFT_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError:
        threads = 1
    return max(1, min(chains, threads))


def sample(target: TargetDensity, config: SamplerConfig) -> PosteriorDraws:
    """Draw from the posterior; reproducible bit-exactly for a fixed config.

    Surfaces a warning in the result when more than 10% of post-warmup
    iterations diverge.
    """
    seeds = np.random.SeedSequence(config.seed).spawn(config.chains)
    workers = _thread_count(config.chains)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: _run_chain(target, config, s), seeds))
    else:
        results = [_run_chain(target, config, s) for s in seeds]

    n_params = len(target.names)
    draws = np.empty((config.chains, config.sampling_iters, n_params))
    for c, res in enumerate(results):
        for i, vec in enumerate(res["unconstrained"]):
            constrained = target.constrain(vec)
            draws[c, i] = [constrained[name] for name in target.names]

    divergences = tuple(res["divergences"] for res in results)
    warnings = []
    div_rate = sum(divergences) / (config.chains * config.sampling_iters)
    if div_rate > 0.10:
        warnings.append(
            f"{div_rate:.1%} of post-warmup iterations diverged; "
            "estimates may be unreliable"
        )
    return PosteriorDraws(
        names=target.names,
        draws=draws,
        accept_rate=tuple(res["accept_rate"] for res in results),
        step_size=tuple(res["step_size"] for res in results),
        divergences=divergences,
        warnings=tuple(warnings),
    )
