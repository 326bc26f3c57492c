"""Seeded noise streams and the Euler-Maruyama update shared by all simulators.

Every Brownian motion in a simulation owns one :class:`RngStream`. A stream is
a Philox counter-based generator keyed by ``(seed, stream_id)``, so a draw
depends only on the key and on how many draws preceded it, never on which
process or thread produced it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalDivergence

__all__ = [
    "RngStream",
    "TimeGrid",
    "Source",
    "stream_id",
    "gaussian_increment",
    "euler_maruyama_step",
    "check_finite",
    "DIVERGENCE_LIMIT",
]

DIVERGENCE_LIMIT = 1e12

_U64 = (1 << 64) - 1


class Source:
    """Low byte of a stream id: which random quantity the stream feeds."""

    PHASE = 0
    AMPLITUDE = 1
    FREQUENCY = 2
    INIT_PHASE = 3
    INIT_AMPLITUDE = 4
    OU_1 = 5
    OU_2 = 6
    FULL_E = 7
    FULL_I = 8


def stream_id(point: int = 0, realization: int = 0, oscillator: int = 0, source: int = 0) -> int:
    """Pack an experiment coordinate into a 64-bit stream id.

    Layout, high to low: 16 bits sweep point, 16 bits realization, 24 bits
    oscillator, 8 bits source.
    """
    for name, value, bits in (
        ("point", point, 16),
        ("realization", realization, 16),
        ("oscillator", oscillator, 24),
        ("source", source, 8),
    ):
        if not 0 <= value < (1 << bits):
            raise ValueError(f"{name}={value} does not fit in {bits} bits")
    return (point << 48) | (realization << 32) | (oscillator << 8) | source


@dataclass
class RngStream:
    """Independent Gaussian stream identified by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0 <= self.seed <= _U64 and 0 <= self.stream_id <= _U64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def standard_normals(self, n: int) -> np.ndarray:
        """Next ``n`` standard normal draws. Chunking does not change the sequence."""
        return self._gen.standard_normal(n)

    def normal(self, variance: float) -> float:
        return gaussian_increment(self, variance)

    def uniform(self, low: float, high: float, n: int) -> np.ndarray:
        return self._gen.uniform(low, high, n)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    n_steps: int
    t0: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def times(self) -> np.ndarray:
        """Sample times including the initial point, length n_steps + 1."""
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    @property
    def duration(self) -> float:
        return self.dt * self.n_steps

    def scaled(self, rate: float) -> "TimeGrid":
        """Grid of the time-changed clock ``rate * t`` on the same step index."""
        return TimeGrid(self.dt * rate, self.n_steps, self.t0 * rate)


def gaussian_increment(stream: RngStream, variance: float) -> float:
    """One draw from Normal(0, variance); advances the stream."""
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    z = float(stream.standard_normals(1)[0])
    return math.sqrt(variance) * z


def check_finite(x, limit: float = DIVERGENCE_LIMIT, step=None, time=None):
    """Raise NumericalDivergence if x holds a non-finite value or exceeds limit."""
    a = np.abs(np.asarray(x, dtype=float))
    if not (np.all(np.isfinite(a)) and np.all(a <= limit)):
        where = "" if step is None else f" at step {step}"
        raise NumericalDivergence(
            f"state left the finite region |x| <= {limit:g}{where}", step=step, time=time
        )
    return x


def euler_maruyama_step(x, drift, noise, dt: float, limit: float = DIVERGENCE_LIMIT):
    """``x + drift*dt + noise`` where noise already carries its sqrt(variance)."""
    check_finite(drift, np.inf)
    check_finite(noise, np.inf)
    out = x + drift * dt + noise
    return check_finite(out, limit)
