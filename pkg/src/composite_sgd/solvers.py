"""Stochastic proximal solvers for composite objectives f(x) + lam * Omega(x).

Three variants share one accelerated two-sequence recursion driven by a
stochastic gradient oracle G with E G(x, .) = grad f(x):

    y_t     = (1 - theta_t) x_t + theta_t z_t
    z_{t+1} = argmin_x { <x, d_t> + (gamma_t L_eff / 2) ||x - z_t||^2 + h(x) }
    x_{t+1} = (1 - theta_t) x_t + theta_t z_{t+1}

``sg``   takes d_t = G(y_t), h = the penalty, and solves the prox exactly.
``ssg``  replaces the penalty by its smoothed form: d_t = G(y_t) + A^T v_mu(y_t),
         h = 0, so the prox step is the closed-form z_t - d_t / (gamma_t L_mu).
``acsa`` is the sg loop with the baseline step sizes gamma_t = 2 gamma* / (L (t+1)).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Protocol, Tuple

import numpy as np

from .core import Array, DivergenceError, ParameterError, RngStream, TraceRecord
from .regularizers import ConvergenceError, Regularizer, evaluate, prox
from .smoothing import SmoothedRegularizer, lipschitz_mu, smoothed_gradient

# Abort when any iterate coordinate exceeds this; a mis-set Lipschitz constant
# silently explodes otherwise.
OVERFLOW_LIMIT = 1e12

ACSA_PILOT_DRAWS = 30


class StochasticOracle(Protocol):
    dim: int

    def sample(self, x: Array, rng: RngStream) -> Array: ...


@dataclass(frozen=True)
class Schedule:
    """Step-size sequences theta_t = 2/(2+t), gamma_t = (2/(t+2)) (N^{3/2}/L_eff + 2).

    They satisfy gamma_t > theta_t and the telescoping inequality
    (1 - theta_{t+1}) / (theta_{t+1} gamma_{t+1}) <= 1 / (theta_t gamma_t).
    """

    N: int
    L_eff: float

    def __post_init__(self):
        if self.N < 1:
            raise ParameterError(f"N must be >= 1, got {self.N}")
        if self.L_eff <= 0:
            raise ParameterError(f"L_eff must be > 0, got {self.L_eff}")

    def theta(self, t: int) -> float:
        return 2.0 / (2.0 + t)

    def gamma(self, t: int) -> float:
        return (2.0 / (t + 2.0)) * (self.N**1.5 / self.L_eff + 2.0)


@dataclass(frozen=True)
class AcsaParams:
    """Baseline step-size scale gamma* = max(2L, sqrt(2 sigma^2 N(N+1)(N+2) / (3 D^2)))."""

    gamma_star: float
    sigma_sq: float
    D: float


def pilot_sigma_sq(oracle: StochasticOracle, x0: Array, rng: RngStream,
                   draws: int = ACSA_PILOT_DRAWS) -> float:
    """Unbiased estimate of E ||G(x0) - grad f(x0)||^2 from repeated draws."""
    if draws < 2:
        raise ParameterError(f"need >= 2 pilot draws, got {draws}")
    samples = np.stack([oracle.sample(x0, rng) for _ in range(draws)])
    centered = samples - samples.mean(axis=0)
    return float((centered**2).sum() / (draws - 1))


def resolve_acsa_params(oracle: StochasticOracle, L: float, N: int, rng: RngStream,
                        sigma_sq: Optional[float] = None, D: float = 1.0,
                        pilot_draws: int = ACSA_PILOT_DRAWS) -> AcsaParams:
    """Fill in gamma*; sigma^2 defaults to a pilot estimate at the origin.

    Pass a dedicated substream for ``rng`` so the pilot draws do not shift the
    solver's own sample sequence.
    """
    if D <= 0:
        raise ParameterError(f"D must be > 0, got {D}")
    if sigma_sq is None:
        sigma_sq = pilot_sigma_sq(oracle, np.zeros(oracle.dim), rng, pilot_draws)
    if sigma_sq < 0:
        raise ParameterError(f"sigma_sq must be >= 0, got {sigma_sq}")
    gamma_star = max(
        2.0 * L,
        math.sqrt(2.0 * sigma_sq * N * (N + 1) * (N + 2) / (3.0 * D * D)),
    )
    return AcsaParams(gamma_star, float(sigma_sq), float(D))


def theorem_bound(D: float, sigma: float, L: float, N: int) -> float:
    """Expected-gap guarantee after N iterations of the sg loop.

    (2 D^2 + sigma^2) / (N+2)^{1/2} + L (4 D^2 + 2 sigma^2) / (N+2)^2.
    """
    _require_nonnegative(D=D, sigma=sigma, L=L, N=N)
    return (2.0 * D * D + sigma * sigma) / math.sqrt(N + 2.0) + L * (
        4.0 * D * D + 2.0 * sigma * sigma
    ) / (N + 2.0) ** 2


def theorem_bound_smoothed(D: float, sigma: float, L: float, A_norm: float,
                           M: float, c: float, N: int) -> float:
    """Guarantee for the smoothed loop under mu = ||A|| / (N+2); adds the
    smoothing penalty (||A|| / (N+2)) (M + (4 D^2 + 2 sigma^2) / c)."""
    _require_nonnegative(D=D, sigma=sigma, L=L, A_norm=A_norm, M=M, N=N)
    if c <= 0:
        raise ParameterError(f"c must be > 0, got {c}")
    return theorem_bound(D, sigma, L, N) + (A_norm / (N + 2.0)) * (
        M + (4.0 * D * D + 2.0 * sigma * sigma) / c
    )


def _require_nonnegative(**kwargs):
    for name, value in kwargs.items():
        if value < 0:
            raise ParameterError(f"{name} must be >= 0, got {value}")


def _check_overflow(z: Array, x: Array, t: int) -> None:
    if np.max(np.abs(z)) > OVERFLOW_LIMIT or np.max(np.abs(x)) > OVERFLOW_LIMIT:
        raise DivergenceError(
            f"iterate exceeded {OVERFLOW_LIMIT:g} at iteration {t}; "
            "is the Lipschitz constant set too small?",
            iteration=t,
        )


class _Tracer:
    """Collects (iteration, elapsed, exact objective) rows on a fixed stride."""

    def __init__(self, objective: Callable[[Array], float], every: int,
                 reference: Optional[float]):
        self.objective = objective
        self.every = every
        self.reference = reference
        self.rows: List[TraceRecord] = []
        self.start = time.perf_counter()

    def record(self, iteration: int, x: Array) -> None:
        value = float(self.objective(x))
        gap = None if self.reference is None else value - self.reference
        self.rows.append(
            TraceRecord(iteration, time.perf_counter() - self.start, value, gap)
        )

    def maybe_record(self, t: int, N: int, x: Array) -> None:
        if self.every > 0 and ((t + 1) % self.every == 0 or t == N):
            self.record(t + 1, x)


def _run_two_sequence(oracle, reg, L, N, rng, gamma_fn, sched: Schedule,
                      smooth_objective, trace_every, reference_objective):
    p = oracle.dim
    x = np.zeros(p)
    z = np.zeros(p)
    tracer = _Tracer(lambda v: smooth_objective(v) + evaluate(reg, v),
                     trace_every, reference_objective)
    if trace_every > 0:
        tracer.record(0, x)
    for t in range(N + 1):
        th = sched.theta(t)
        eta = gamma_fn(t) * L
        y = (1.0 - th) * x + th * z
        g = oracle.sample(y, rng)
        try:
            z = prox(reg, g, z, eta)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"prox failed at iteration {t}: {exc}", last_iterate=exc.last_iterate
            ) from exc
        x = (1.0 - th) * x + th * z
        _check_overflow(z, x, t)
        tracer.maybe_record(t, N, x)
    return x, tracer.rows


def run_sg(oracle: StochasticOracle, reg: Regularizer, L: float, N: int,
           rng: RngStream, smooth_objective: Callable[[Array], float],
           trace_every: int = 1,
           reference_objective: Optional[float] = None) -> Tuple[Array, List[TraceRecord]]:
    """Stochastic proximal loop with the accelerated two-sequence schedule.

    Runs iterations t = 0..N from x_0 = z_0 = 0 and returns x_{N+1} together
    with trace rows of the exact objective smooth_objective + penalty, sampled
    every ``trace_every`` iterations (0 disables tracing).
    """
    if L <= 0:
        raise ParameterError(f"L must be > 0, got {L}")
    sched = Schedule(N, L)
    return _run_two_sequence(oracle, reg, L, N, rng, sched.gamma, sched,
                             smooth_objective, trace_every, reference_objective)


def run_acsa(oracle: StochasticOracle, reg: Regularizer, L: float, N: int,
             params: AcsaParams, rng: RngStream,
             smooth_objective: Callable[[Array], float], trace_every: int = 1,
             reference_objective: Optional[float] = None) -> Tuple[Array, List[TraceRecord]]:
    """Baseline: the sg loop with step sizes gamma_t = 2 gamma* / (L (t+1))."""
    if L <= 0:
        raise ParameterError(f"L must be > 0, got {L}")
    sched = Schedule(N, L)  # theta_t only; gamma comes from params
    gamma_fn = lambda t: 2.0 * params.gamma_star / (L * (t + 1.0))
    return _run_two_sequence(oracle, reg, L, N, rng, gamma_fn, sched,
                             smooth_objective, trace_every, reference_objective)


def run_ssg(oracle: StochasticOracle, sreg: SmoothedRegularizer, L: float, N: int,
            rng: RngStream, smooth_objective: Callable[[Array], float],
            trace_every: int = 1,
            reference_objective: Optional[float] = None) -> Tuple[Array, List[TraceRecord]]:
    """Smoothed variant: closed-form steps against G + A^T v_mu, traced on the
    original (non-smoothed) objective.

    The effective Lipschitz constant is L_mu = L + ||A||^2 / (c mu); when the
    penalty is absent (inert smoothing) the loop reduces to sg with h = 0.
    """
    if L < 0:
        raise ParameterError(f"L must be >= 0, got {L}")
    if N < 1:
        raise ParameterError(f"N must be >= 1, got {N}")
    L_mu = lipschitz_mu(L, sreg)
    sched = Schedule(N, L_mu)
    p = oracle.dim
    x = np.zeros(p)
    z = np.zeros(p)
    tracer = _Tracer(lambda v: smooth_objective(v) + evaluate(sreg.base, v),
                     trace_every, reference_objective)
    if trace_every > 0:
        tracer.record(0, x)
    for t in range(N + 1):
        th = sched.theta(t)
        eta = sched.gamma(t) * L_mu
        y = (1.0 - th) * x + th * z
        g = oracle.sample(y, rng)
        if not sreg.inert:
            g = g + smoothed_gradient(sreg, y)
        z = z - g / eta
        x = (1.0 - th) * x + th * z
        _check_overflow(z, x, t)
        tracer.maybe_record(t, N, x)
    return x, tracer.rows
