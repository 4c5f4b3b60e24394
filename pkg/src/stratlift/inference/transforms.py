"""Bijective parameter transforms with log-Jacobians.

Posteriors are sampled on an unconstrained vector; these maps carry simplex
and positivity constraints. Conventions:

* simplex: k-1 free logits against a fixed last category,
  pi_j = exp(v_j) / (1 + sum exp(v)), pi_k = 1 / (1 + sum exp(v));
  log|J| of the map v -> (pi_1..pi_{k-1}) is sum_i log pi_i over all k.
* positive: exponential map, log|J| = v.
"""

from __future__ import annotations

import numpy as np


def transform_simplex(unconstrained: np.ndarray) -> tuple[np.ndarray, float]:
    """Map k-1 free logits to the interior of the k-simplex.

    Returns the simplex point and the log-Jacobian needed when placing a
    density on the simplex. The zero vector maps to the uniform simplex.
    """
    v = np.asarray(unconstrained, dtype=np.float64)
    logits = np.concatenate([v, [0.0]])
    logits -= logits.max()
    expd = np.exp(logits)
    pi = expd / expd.sum()
    return pi, float(np.log(pi).sum())


def simplex_to_unconstrained(pi: np.ndarray) -> np.ndarray:
    """Inverse of :func:`transform_simplex` on the simplex interior."""
    p = np.asarray(pi, dtype=np.float64)
    if (p <= 0).any():
        raise ValueError("inverse simplex transform needs strictly positive coordinates")
    return np.log(p[:-1]) - np.log(p[-1])


def simplex_chain_rule(pi: np.ndarray, grad_pi: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. simplex coordinates back to the free logits.

    With g = d logp / d pi (length k), the logit gradient is
    pi_j * (g_j - sum_i g_i pi_i) for j = 1..k-1.
    """
    inner = float(np.dot(grad_pi, pi))
    return pi[:-1] * (grad_pi[:-1] - inner)


def transform_positive(unconstrained: float) -> tuple[float, float]:
    """Exponential map onto (0, inf); the log-Jacobian equals the input."""
    return float(np.exp(unconstrained)), float(unconstrained)


def positive_to_unconstrained(value: float) -> float:
    if value <= 0:
        raise ValueError("inverse positive transform needs a positive value")
    return float(np.log(value))
