"""Seeded Brownian increments from a counter-based generator.

Each path draws from Philox-4x64 with key ``(seed, path_index)`` and counter
starting at zero, so any path can be regenerated alone, in any order, on any
worker. Raw 64-bit words become uniforms on (0, 1) as
``((w >> 11) + 0.5) * 2**-53`` and pairs of uniforms become normals by
Box-Muller: ``r = sqrt(-2 log u1)``, ``(r cos 2 pi u2, r sin 2 pi u2)``.
Normals fill the ``(N, n)`` increment array row by row and are scaled by
``sqrt(h)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def standard_normals(seed: int, path_index: int, count: int) -> np.ndarray:
    key = np.array([seed & _MASK64, path_index & _MASK64], dtype=np.uint64)
    bitgen = np.random.Philox(key=key)
    pairs = (count + 1) // 2
    raw = bitgen.random_raw(2 * pairs)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:count]


@dataclass(frozen=True, eq=False)
class BrownianPath:
    t0: float
    t1: float
    steps: int
    n: int
    seed: int
    path_index: int
    increments: np.ndarray  # (steps, n)

    @property
    def h(self) -> float:
        return (self.t1 - self.t0) / self.steps if self.steps else 0.0

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.steps + 1)

    def values(self) -> np.ndarray:
        """B(t_k) - B(t_0) at every grid time, shape (steps + 1, n)."""
        out = np.zeros((self.steps + 1, self.n))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out

    def coarsen(self) -> "BrownianPath":
        """Same Brownian motion on a grid with twice the step (pairwise sums)."""
        if self.steps % 2:
            raise ValueError("need an even number of steps to coarsen")
        inc = self.increments[0::2] + self.increments[1::2]
        return BrownianPath(self.t0, self.t1, self.steps // 2, self.n, self.seed,
                            self.path_index, inc)


def sample_brownian(n: int, t0: float, t1: float, N: int, seed: int = 0,
                    path_index: int = 0) -> BrownianPath:
    if N < 1:
        raise ValueError("N must be >= 1")
    if not t1 > t0:
        raise ValueError("need t1 > t0")
    h = (t1 - t0) / N
    z = standard_normals(seed, path_index, N * n).reshape(N, n)
    return BrownianPath(t0, t1, N, n, seed, path_index, np.sqrt(h) * z)
