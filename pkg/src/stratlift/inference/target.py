"""The target-density contract every model posterior implements."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class TargetDensity:
    """A log density over an unconstrained vector, with gradient and decoder.

    ``logp`` and ``grad`` act on the unconstrained scale and must include all
    transform Jacobians. ``constrain`` decodes one unconstrained point into
    the named, constrained (and back-transformed) parameter map; ``names``
    fixes the parameter order used in draws. ``coord_names`` labels the
    unconstrained coordinates for error messages.

    Instances are immutable and safe to share read-only across chains.
    """

    dim: int
    names: tuple[str, ...]
    logp: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    constrain: Callable[[np.ndarray], Mapping[str, float]]
    initial_point: Callable[[], np.ndarray]
    coord_names: tuple[str, ...] = field(default=())

    def coord_name(self, index: int) -> str:
        if 0 <= index < len(self.coord_names):
            return self.coord_names[index]
        return f"coordinate {index}"


def finite_difference_gradient(
    logp: Callable[[np.ndarray], float], v: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    """Central finite differences of logp, the oracle for gradient audits."""
    v = np.asarray(v, dtype=np.float64)
    out = np.empty_like(v)
    for i in range(v.size):
        step = np.zeros_like(v)
        step[i] = h
        out[i] = (logp(v + step) - logp(v - step)) / (2.0 * h)
    return out


def gradient_check(
    target: TargetDensity,
    points: Sequence[np.ndarray],
    rel_tol: float = 1e-6,
    h: float = 1e-5,
) -> float:
    """Largest relative gradient error over the given unconstrained points.

    Raises AssertionError naming the worst coordinate if the analytic
    gradient disagrees with central finite differences beyond ``rel_tol``
    (relative to max(1, |finite difference|) elementwise).
    """
    worst = 0.0
    for v in points:
        analytic = target.grad(np.asarray(v, dtype=np.float64))
        numeric = finite_difference_gradient(target.logp, v, h=h)
        scale = np.maximum(1.0, np.abs(numeric))
        rel = np.abs(analytic - numeric) / scale
        worst = max(worst, float(rel.max()))
        if (rel > rel_tol).any():
            i = int(rel.argmax())
            raise AssertionError(
                f"gradient mismatch at {target.coord_name(i)}: analytic={analytic[i]!r} "
                f"finite-diff={numeric[i]!r} rel={rel[i]:.3e}"
            )
    return worst
