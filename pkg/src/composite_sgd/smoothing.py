"""Smooth lower approximation of lam * Omega via its dual-ball representation.

The penalty is max over the product of unit balls Q of v^T A x. Subtracting the
strongly convex term (mu/2) ||v||^2 inside the max yields a value h_mu(x) with

    h_mu(x) <= lam * Omega(x) <= h_mu(x) + mu * M,   M = max_{v in Q} (1/2)||v||^2,

whose gradient A^T v_mu(x) is Lipschitz with constant ||A||^2 / (c mu), c = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Array, ParameterError, as_vector
from .regularizers import LinearMapA, Regularizer, linear_map, operator_norm

# Substitute for mu when the penalty vanishes (lam = 0) and the schedule would
# otherwise divide by it; the smoothing is flagged inert and bypassed.
MU_FLOOR = 1e-12


@dataclass(frozen=True)
class SmoothedRegularizer:
    base: Regularizer
    mu: float
    A_norm: float
    M: float
    c: float = 1.0
    inert: bool = False

    def __post_init__(self):
        if self.mu <= 0:
            raise ParameterError(f"mu must be > 0, got {self.mu}")


def mu_schedule(A_norm: float, N: int) -> tuple[float, bool]:
    """Horizon schedule mu = ||A|| / (N + 2); (MU_FLOOR, inert) when ||A|| = 0."""
    if N < 0:
        raise ParameterError(f"N must be >= 0, got {N}")
    if A_norm == 0.0:
        return MU_FLOOR, True
    return A_norm / (N + 2), False


def smoothed(reg: Regularizer, mu: float | None = None, N: int | None = None) -> SmoothedRegularizer:
    """Wrap a regularizer for smoothing; defaults mu to the horizon schedule."""
    a_norm = operator_norm(reg)
    if mu is None:
        if N is None:
            raise ParameterError("pass either mu or the iteration count N")
        mu, inert = mu_schedule(a_norm, N)
    else:
        if mu <= 0:
            raise ParameterError(f"mu must be > 0, got {mu}")
        inert = a_norm == 0.0
    if reg.structure is None:
        m_const = reg.p / 2.0
    else:
        m_const = len(reg.structure) / 2.0
    return SmoothedRegularizer(reg, float(mu), a_norm, m_const, 1.0, inert)


def _map(s: SmoothedRegularizer) -> LinearMapA:
    return linear_map(s.base)


def maximizer(s: SmoothedRegularizer, x) -> Array:
    """The unique v in Q attaining h_mu(x), in flat block layout.

    l1: per-coordinate clamp of lam * x / mu to [-1, 1]. Group norm: per-group
    projection of lam * w_g * x_g / mu onto the unit ball.
    """
    x = as_vector(x)
    if s.mu <= 0:
        raise ParameterError(f"mu must be > 0, got {s.mu}")
    reg = s.base
    if reg.structure is None:
        return np.clip(reg.lam * x / s.mu, -1.0, 1.0)
    st = reg.structure
    t = _map(s).apply(x) / s.mu
    norms = st.block_norms(t)
    factor = 1.0 / np.maximum(norms, 1.0)
    return t * np.repeat(factor, st.sizes)


def smoothed_value(s: SmoothedRegularizer, x) -> float:
    """h_mu(x) = v^T A x - (mu/2) ||v||^2 at the maximizing v."""
    x = as_vector(x)
    v = maximizer(s, x)
    reg = s.base
    if reg.structure is None:
        ax = reg.lam * x
    else:
        ax = _map(s).apply(x)
    return float(v @ ax - 0.5 * s.mu * (v @ v))


def smoothed_gradient(s: SmoothedRegularizer, x) -> Array:
    """Gradient A^T v_mu(x); for l1 this is lam * clamp(lam * x / mu, -1, 1)."""
    x = as_vector(x)
    v = maximizer(s, x)
    reg = s.base
    if reg.structure is None:
        return reg.lam * v
    return _map(s).adjoint(v)


def lipschitz_mu(L: float, s: SmoothedRegularizer) -> float:
    """Gradient Lipschitz constant of the smoothed composite: L + ||A||^2 / (c mu)."""
    if L < 0:
        raise ParameterError(f"L must be >= 0, got {L}")
    if s.mu <= 0:
        raise ParameterError(f"mu must be > 0, got {s.mu}")
    if s.inert:
        return float(L)
    return float(L + s.A_norm**2 / (s.c * s.mu))
