"""Gauss-Legendre rules on [0, 1]."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_NODES = 64


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def m(self) -> int:
        return len(self.nodes)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Apply the rule along the first axis of ``values``."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def _legendre(m: int, x: float) -> tuple[float, float]:
    """P_m(x) and P_m'(x) by the three-term recurrence."""
    p0, p1 = 1.0, x
    for k in range(2, m + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = m * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def gauss_legendre(m: int) -> QuadratureRule:
    """m-point rule on [0, 1], exact for polynomials of degree <= 2m - 1."""
    if not isinstance(m, (int, np.integer)) or not 1 <= m <= MAX_NODES:
        raise ValueError(f"number of nodes must be in 1..{MAX_NODES}, got {m!r}")
    if m == 1:
        return QuadratureRule(np.array([0.5]), np.array([1.0]))
    half = (m + 1) // 2
    xs = np.empty(half)
    ws = np.empty(half)
    for i in range(half):
        # Tricomi's initial guess for the i-th largest root
        x = math.cos(math.pi * (i + 0.75) / (m + 0.5))
        for _ in range(100):
            p, dp = _legendre(m, x)
            dx = p / dp
            x -= dx
            if abs(dx) < 1e-16:
                break
        p, dp = _legendre(m, x)
        xs[i] = x
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp)
    if m % 2:
        xs[-1] = 0.0
    # mirror so the rule is symmetric about 0 exactly
    x_full = np.concatenate([-xs, xs[::-1][m % 2:]])
    w_full = np.concatenate([ws, ws[::-1][m % 2:]])
    nodes = 0.5 * (x_full + 1.0)
    weights = 0.5 * w_full
    return QuadratureRule(nodes, weights)
