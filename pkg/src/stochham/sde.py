"""Stratonovich integrators: explicit Heun and implicit midpoint.

For dz = mu(z) dt + sigma(z) o dB over one step of length h with increment dB:

heun      zb = z + mu(z) h + sigma(z) dB
          z' = z + (mu(z) + mu(zb)) h/2 + (sigma(z) + sigma(zb)) dB/2
midpoint  z' = z + mu(zm) h + sigma(zm) dB,  zm = (z + z')/2

The midpoint equation is solved by fixed-point iteration, with a Newton
fallback that uses exact field Jacobians. Both schemes optionally carry the
tangent map U = dz/dz0 by differentiating the discrete step itself.

Internally states are batched as ``(2d, paths)``; converged paths are frozen
inside the midpoint solve so each path's result does not depend on the others'
iteration counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .brownian import BrownianPath
from .field import ComponentError, PhasePoint, StochasticField, coordinate_names, eval_field, jacobians

SCHEMES = ("heun", "midpoint")


class StepError(Exception):
    def __init__(self, message: str, step: int | None = None, residual: float | None = None):
        self.step = step
        self.residual = residual
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class DivergenceError(StepError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "midpoint"
    h: float | None = None  # None: take the step from the Brownian path
    newton_tol: float = 1e-12
    max_iters: int = 50

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.h is not None and not self.h > 0:
            raise ValueError("h must be positive")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True, eq=False)
class SDEPath:
    times: np.ndarray  # (N + 1,)
    states: np.ndarray  # (N + 1, 2d)
    scheme: str
    brownian: BrownianPath | None

    def __len__(self) -> int:
        return len(self.times)

    def point(self, k: int) -> PhasePoint:
        return PhasePoint.from_z(self.states[k])

    def to_csv(self, stride: int = 1, header: Sequence[str] = ()) -> str:
        d = self.states.shape[1] // 2
        lines = [f"# {h}" for h in header]
        lines.append(",".join(["t"] + coordinate_names(d)))
        idx = list(range(0, len(self.times), stride))
        if idx[-1] != len(self.times) - 1:
            idx.append(len(self.times) - 1)
        for k in idx:
            lines.append(",".join(repr(float(v)) for v in (self.times[k], *self.states[k])))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# single steps (batched)


def _noise(sigma, dB):
    # sigma (2d, n, P), dB (n, P) -> (2d, P)
    return np.einsum("aj...,j...->a...", sigma, dB)


def _step_matrix(f, z, h, dB):
    """K = h dmu/dz + sum_j dsigma_j/dz dB_j at z, shape (2d, 2d, P)."""
    jac = jacobians(f, z)
    K = h * jac.drift_matrix()
    if f.n:
        K = K + np.einsum("ajk...,j...->ak...", jac.diffusion_tensor(), dB)
    return K


def _matmul(A, B):
    # batched (a, b, P) @ (b, c, P)
    return np.einsum("ab...,bc...->ac...", A, B)


def _solve(A, B):
    # batched solve of A X = B with A (m, m, P), B (m, c, P) or (m, P)
    At = np.moveaxis(A, -1, 0)
    vec = B.ndim == 2
    Bt = np.moveaxis(B[:, None] if vec else B, -1, 0)
    X = np.moveaxis(np.linalg.solve(At, Bt), 0, -1)
    return X[:, 0] if vec else X


def _heun(f, z, h, dB, U=None):
    mu0, s0 = eval_field(f, z)
    zb = z + mu0 * h + _noise(s0, dB)
    mu1, s1 = eval_field(f, zb)
    zn = z + 0.5 * (mu0 + mu1) * h + 0.5 * _noise(s0 + s1, dB)
    Un = None
    if U is not None:
        K0 = _step_matrix(f, z, h, dB)
        K1 = _step_matrix(f, zb, h, dB)
        Ub = U + _matmul(K0, U)
        Un = U + 0.5 * _matmul(K0, U) + 0.5 * _matmul(K1, Ub)
    return zn, Un, 1


def _midpoint_map(f, z, zn, h, dB):
    zm = 0.5 * (z + zn)
    mu, s = eval_field(f, zm)
    return z + mu * h + _noise(s, dB)


def _floor(z):
    """Rounding level of a state update: no absolute tolerance can go below it."""
    return 8 * np.finfo(float).eps * (1 + np.abs(z).max(axis=0))


def _midpoint(f, z, h, dB, tol, max_iters, U=None):
    zn = z.copy()
    active = np.arange(z.shape[1])
    # Once a path's update is below tol it keeps iterating until the update hits
    # rounding level or stops shrinking. Stopping at the first update below tol
    # leaves an error of about (contraction * tol) with the same sign every step,
    # which appears as a linear drift of quadratic invariants over long runs.
    last = np.full(z.shape[1], np.inf)
    iters = 0
    with np.errstate(all="ignore"):
        for iters in range(1, max_iters + 1):
            try:
                F = _midpoint_map(f, z[:, active], zn[:, active], h, dB[:, active])
            except ComponentError:
                break  # let Newton try from a fresh start
            delta = np.abs(F - zn[:, active]).max(axis=0)
            zn[:, active] = F
            floor = _floor(F)
            stalled = delta >= 0.5 * last[active]
            done = (delta <= np.maximum(tol, floor)) & ((delta <= floor) | stalled)
            last[active] = np.where(delta <= floor, 0.0, delta)
            active = active[~done]
            if active.size == 0:
                break
    active = active[~(last[active] <= tol)]
    if active.size:
        zn[:, active], it = _newton(f, z[:, active], h, dB[:, active], tol, max_iters)
        iters += it
    Un = None
    if U is not None:
        K = _step_matrix(f, 0.5 * (z + zn), h, dB)
        eye = np.eye(z.shape[0])[:, :, None]
        Un = _solve(eye - 0.5 * K, _matmul(eye + 0.5 * K, U))
    return zn, Un, iters


def _newton(f, z, h, dB, tol, max_iters):
    zn = z.copy()
    eye = np.eye(z.shape[0])[:, :, None]
    res = math.inf
    for it in range(1, max_iters + 1):
        G = zn - _midpoint_map(f, z, zn, h, dB)
        K = _step_matrix(f, 0.5 * (z + zn), h, dB)
        step = _solve(eye - 0.5 * K, G)
        zn = zn - step
        err = np.abs(step).max(axis=0)
        res = float(err.max())
        if not np.isfinite(res):
            break
        if np.all(err <= np.maximum(tol, _floor(zn))):
            return zn, it
    raise StepError(f"implicit midpoint solve did not converge (residual {res:.3g})", residual=res)


def _as_batch(z, dB, n):
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    dB = np.zeros(n) if dB is None else np.asarray(dB, dtype=float)
    if single:
        return z[:, None], dB.reshape(n, 1), True
    return z, dB, False


def step_heun(f: StochasticField, z, h: float, dB=None) -> np.ndarray:
    zz, bb, single = _as_batch(z, dB, f.n)
    zn, _, _ = _heun(f, zz, h, bb)
    _check_finite(zn, None)
    return zn[:, 0] if single else zn


def step_midpoint(f: StochasticField, z, h: float, dB=None, tol: float = 1e-12,
                  max_iters: int = 50, return_iterations: bool = False):
    zz, bb, single = _as_batch(z, dB, f.n)
    zn, _, iters = _midpoint(f, zz, h, bb, tol, max_iters)
    _check_finite(zn, None)
    out = zn[:, 0] if single else zn
    return (out, iters) if return_iterations else out


def _check_finite(z, step):
    if not np.all(np.isfinite(z)):
        raise DivergenceError("state became non-finite", step)


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class BatchResult:
    times: np.ndarray  # (N + 1,)
    states: np.ndarray  # (N + 1, 2d, P)
    tangents: np.ndarray | None = field(default=None)  # (N + 1, 2d, 2d, P)


def _resolve_h(cfg, paths):
    h = paths[0].h
    steps = paths[0].steps
    for bp in paths:
        if bp.steps != steps or bp.t0 != paths[0].t0 or bp.t1 != paths[0].t1:
            raise ValueError("all Brownian paths in a batch must share the time grid")
    if cfg.h is not None and steps and not math.isclose(cfg.h, h, rel_tol=1e-9):
        raise ValueError(f"integrator step {cfg.h} does not match Brownian step {h}")
    return h


def integrate_batch(f: StochasticField, z0, cfg: IntegratorConfig,
                    paths: Sequence[BrownianPath], tangent: bool = False) -> BatchResult:
    """Integrate every path in ``paths`` from the same ``z0`` in lock-step."""
    if not paths:
        raise ValueError("need at least one Brownian path")
    for bp in paths:
        if bp.n != f.n:
            raise ValueError(f"Brownian path has {bp.n} channels, field has {f.n}")
    h = _resolve_h(cfg, paths)
    N = paths[0].steps
    P = len(paths)
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (2 * f.d,):
        raise ValueError(f"initial state must have {2 * f.d} entries")
    dBs = np.stack([bp.increments for bp in paths], axis=-1)  # (N, n, P)
    dim = 2 * f.d
    states = np.empty((N + 1, dim, P))
    states[0] = z0[:, None]
    tangents = None
    U = None
    if tangent:
        tangents = np.empty((N + 1, dim, dim, P))
        tangents[0] = np.eye(dim)[:, :, None]
        U = tangents[0].copy()
    z = states[0].copy()
    for k in range(N):
        dB = dBs[k] if f.n else np.zeros((0, P))
        try:
            if cfg.scheme == "heun":
                z, U, _ = _heun(f, z, h, dB, U)
            else:
                z, U, _ = _midpoint(f, z, h, dB, cfg.newton_tol, cfg.max_iters, U)
        except ComponentError as err:
            raise DivergenceError(f"field evaluation failed: {err}", k) from err
        except StepError as err:
            raise StepError(str(err), k, err.residual) from err
        _check_finite(z, k)
        states[k + 1] = z
        if tangent:
            if not np.all(np.isfinite(U)):
                raise DivergenceError("tangent map became non-finite", k)
            tangents[k + 1] = U
    return BatchResult(paths[0].times, states, tangents)


def integrate(f: StochasticField, z0, cfg: IntegratorConfig, bp: BrownianPath) -> SDEPath:
    res = integrate_batch(f, z0, cfg, [bp])
    return SDEPath(res.times, res.states[:, :, 0], cfg.scheme, bp)


def integrate_paths(f: StochasticField, z0, cfg: IntegratorConfig,
                    paths: Sequence[BrownianPath]) -> list[SDEPath]:
    res = integrate_batch(f, z0, cfg, paths)
    return [SDEPath(res.times, res.states[:, :, i], cfg.scheme, bp) for i, bp in enumerate(paths)]


def stratonovich_integral(X, Y) -> float:
    """Midpoint sum of 1/2 (X_k + X_{k+1}) (Y_{k+1} - Y_k), the discrete int X o dY."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != Y.shape or X.ndim != 1:
        raise ValueError(f"X and Y must be 1-d arrays of equal length, got {X.shape} and {Y.shape}")
    return math.fsum(0.5 * (X[:-1] + X[1:]) * np.diff(Y))
