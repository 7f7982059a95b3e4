"""Shared numeric primitives: dense vector ops, seeded random streams, trace records."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

Array = np.ndarray

_TWO_PI = 2.0 * math.pi
_MAX_SEED = 2**64 - 1


class DimensionError(ValueError):
    """Operands have incompatible lengths."""


class ParameterError(ValueError):
    """A scalar argument is outside its legal range."""


class CapacityError(ValueError):
    """A requested object is too large to build."""


class ConvergenceError(RuntimeError):
    """An iterative routine did not reach its tolerance.

    ``last_iterate`` holds the best value available when the routine gave up.
    """

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DivergenceError(RuntimeError):
    """A solver iterate blew past the overflow guard; ``iteration`` names the step."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


def as_vector(values) -> Array:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"expected a 1-d vector, got shape {arr.shape}")
    return arr


def _require_same_length(a: Array, b: Array) -> None:
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")


def dot(a, b) -> float:
    """Inner product sum(a_i * b_i); lengths must agree."""
    a, b = as_vector(a), as_vector(b)
    _require_same_length(a, b)
    return float(a @ b)


def norm2(a) -> float:
    """Euclidean norm sqrt(sum(a_i^2))."""
    a = as_vector(a)
    return float(np.sqrt(a @ a))


def axpy(alpha: float, x, y) -> Array:
    """alpha * x + y as a new vector; lengths must agree."""
    x, y = as_vector(x), as_vector(y)
    _require_same_length(x, y)
    return alpha * x + y


class RngStream:
    """Deterministic counter-based random stream with derivable substreams.

    Backed by Philox keyed on (seed, stream path): the same seed reproduces the
    same draw sequence on any platform, and ``split(stream_id)`` derives an
    independent stream from the pair (seed, stream-id).

    Normal draws use the Box-Muller transform. Uniforms are consumed two per
    pair of normals, taken from one batch in (even, odd) index order:

        r  = sqrt(-2 * log(1 - u_even))
        z0 = r * cos(2 * pi * u_odd)
        z1 = r * sin(2 * pi * u_odd)

    An odd-sized request still consumes both uniforms of the final pair and
    discards the trailing sine normal.
    """

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        seed = int(seed)
        if not 0 <= seed <= _MAX_SEED:
            raise ParameterError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = seed
        self.stream_path = tuple(int(s) for s in _path)
        self._gen = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(seed, spawn_key=self.stream_path))
        )

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_path={self.stream_path})"

    def split(self, stream_id: int) -> "RngStream":
        """Independent substream keyed by (seed, ..., stream_id)."""
        return RngStream(self.seed, self.stream_path + (int(stream_id),))

    def uniform(self, n: int) -> Array:
        """n i.i.d. draws from [0, 1)."""
        if n < 0:
            raise ParameterError(f"n must be >= 0, got {n}")
        return self._gen.random(int(n))

    def normal(self, n: int) -> Array:
        """n i.i.d. standard normal draws via Box-Muller."""
        if n < 1:
            raise ParameterError(f"n must be >= 1, got {n}")
        pairs = (int(n) + 1) // 2
        u = self.uniform(2 * pairs)
        r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        angle = _TWO_PI * u[1::2]
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(angle)
        z[1::2] = r * np.sin(angle)
        return z[:n]

    def indices(self, n: int, upper: int) -> Array:
        """n indices drawn uniformly with replacement from {0, ..., upper-1}."""
        if upper < 1:
            raise ParameterError(f"upper must be >= 1, got {upper}")
        u = self.uniform(n)
        return np.minimum((u * upper).astype(np.int64), upper - 1)


def sample_gaussian(rng: RngStream, n: int) -> Array:
    """n standard normal draws from the stream (see RngStream.normal)."""
    return rng.normal(n)


@dataclass(frozen=True)
class TraceRecord:
    """One sampled point of a solver run: exact objective at iterate ``iteration``."""

    iteration: int
    elapsed_seconds: float
    objective: float
    gap: Optional[float] = None
