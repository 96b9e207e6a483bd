"""Stochastic vector fields X = {X_D, X_S} on the phase space R^{2d}.

States are stacked as ``z = (q0..q{d-1}, p0..p{d-1})``. Every function here
accepts either a single state of shape ``(2d,)`` or a batch of shape
``(2d, *batch)``; results carry the same trailing batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .expr import Expr, ExprError


class FieldError(Exception):
    pass


class ComponentError(FieldError):
    """An expression failed to evaluate; ``component`` names it, e.g. ``QS[0][1]``."""

    def __init__(self, component: str, cause: ExprError):
        self.component = component
        self.cause = cause
        self.points = getattr(cause, "points", None)
        super().__init__(f"{component}: {cause}")


def coordinate_names(d: int) -> list[str]:
    return [f"q{i}" for i in range(d)] + [f"p{i}" for i in range(d)]


@dataclass(frozen=True)
class PhasePoint:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(-1)
        p = np.asarray(self.p, dtype=float).reshape(-1)
        if q.shape != p.shape:
            raise FieldError("q and p must have the same length")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise FieldError("phase point entries must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_z(cls, z) -> "PhasePoint":
        z = np.asarray(z, dtype=float)
        d = z.shape[0] // 2
        return cls(z[:d], z[d:])

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    def __array__(self, dtype=None, copy=None):
        return self.z if dtype is None else self.z.astype(dtype)


@dataclass(frozen=True, eq=False)
class StochasticField:
    """Drift (X_QD, X_PD) and diffusion (X_QS, X_PS) expressions.

    ``qs[i][j]`` is the channel-``j`` diffusion of ``q_i``. ``n = 0`` is a
    deterministic system.
    """

    d: int
    n: int
    qd: tuple[Expr, ...]
    pd: tuple[Expr, ...]
    qs: tuple[tuple[Expr, ...], ...]
    ps: tuple[tuple[Expr, ...], ...]
    params: Mapping[str, float] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        d, n = self.d, self.n
        if d < 1 or n < 0:
            raise FieldError(f"need d >= 1 and n >= 0, got d={d}, n={n}")
        if len(self.qd) != d or len(self.pd) != d:
            raise FieldError("drift must have d entries per block")
        if len(self.qs) != d or len(self.ps) != d or any(
            len(row) != n for row in (*self.qs, *self.ps)
        ):
            raise FieldError("diffusion blocks must be d x n")
        allowed = set(coordinate_names(d)) | set(self.params)
        for name, e in self.components():
            bad = ex.symbols(e) - allowed
            if bad:
                raise FieldError(f"{name}: undeclared symbol(s) {', '.join(sorted(bad))}")

    @classmethod
    def build(cls, d: int, n: int, qd: Sequence, pd: Sequence, qs=None, ps=None,
              params: Mapping[str, float] | None = None, label: str = "") -> "StochasticField":
        """Construct from source strings or ASTs; omitted diffusion entries are zero.

        With ``d == 1`` the bare names ``q`` and ``p`` are accepted for
        ``q0`` and ``p0``.
        """
        params = dict(params or {})

        def conv(item):
            e = ex.parse(item) if isinstance(item, str) else item
            if d == 1:
                e = ex.rename(e, {"q": "q0", "p": "p0"})
            return ex.bind_params(e, params)

        def block(rows):
            if rows is None:
                return tuple(tuple(ex.ZERO for _ in range(n)) for _ in range(d))
            return tuple(tuple(conv(c) for c in row) for row in rows)

        return cls(d, n, tuple(conv(c) for c in qd), tuple(conv(c) for c in pd),
                   block(qs), block(ps), params, label)

    def components(self):
        """Yield ``(name, expr)`` for all 2d + 2dn components."""
        for i, e in enumerate(self.qd):
            yield f"QD[{i}]", e
        for i, e in enumerate(self.pd):
            yield f"PD[{i}]", e
        for i in range(self.d):
            for j in range(self.n):
                yield f"QS[{i}][{j}]", self.qs[i][j]
        for i in range(self.d):
            for j in range(self.n):
                yield f"PS[{i}][{j}]", self.ps[i][j]

    def with_params(self, **params) -> "StochasticField":
        unknown = set(params) - set(self.params)
        if unknown:
            raise FieldError(f"unknown parameter(s) {sorted(unknown)}")
        return StochasticField(self.d, self.n, self.qd, self.pd, self.qs, self.ps,
                               {**self.params, **params}, self.label)

    def replace(self, **components) -> "StochasticField":
        """Copy with some of qd/pd/qs/ps swapped out (used to perturb fields)."""
        kw = dict(d=self.d, n=self.n, qd=self.qd, pd=self.pd, qs=self.qs, ps=self.ps,
                  params=self.params, label=self.label)
        kw.update(components)
        return StochasticField(**kw)


@dataclass(frozen=True)
class FieldJacobians:
    """Exact partials; diffusion tensors are indexed (component i, channel j, coordinate k)."""

    dQD_dQ: np.ndarray
    dQD_dP: np.ndarray
    dPD_dQ: np.ndarray
    dPD_dP: np.ndarray
    dQS_dQ: np.ndarray
    dQS_dP: np.ndarray
    dPS_dQ: np.ndarray
    dPS_dP: np.ndarray

    def drift_matrix(self) -> np.ndarray:
        """Full ``(2d, 2d, ...)`` Jacobian of the drift w.r.t. z."""
        top = np.concatenate([self.dQD_dQ, self.dQD_dP], axis=1)
        bottom = np.concatenate([self.dPD_dQ, self.dPD_dP], axis=1)
        return np.concatenate([top, bottom], axis=0)

    def diffusion_tensor(self) -> np.ndarray:
        """``(2d, n, 2d, ...)`` array of d sigma[a, j] / d z[k]."""
        top = np.concatenate([self.dQS_dQ, self.dQS_dP], axis=2)
        bottom = np.concatenate([self.dPS_dQ, self.dPS_dP], axis=2)
        return np.concatenate([top, bottom], axis=0)


def _as_state(f: StochasticField, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[:1] != (2 * f.d,):
        raise FieldError(f"state must have leading dimension {2 * f.d}, got shape {z.shape}")
    return z


def env_for(f: StochasticField, z) -> ex.EvalEnv:
    z = _as_state(f, z)
    return ex.EvalEnv(dict(zip(coordinate_names(f.d), z)), f.params)


def _eval_block(f, env, exprs, names, batch):
    out = np.empty((len(exprs),) + batch)
    for r, (e, name) in enumerate(zip(exprs, names)):
        try:
            out[r] = ex.evaluate(e, env)
        except ExprError as err:
            raise ComponentError(name, err) from err
    return out


def eval_field(f: StochasticField, z) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(drift, diffusion)`` with shapes ``(2d, ...)`` and ``(2d, n, ...)``."""
    z = _as_state(f, z)
    env = env_for(f, z)
    batch = z.shape[1:]
    d, n = f.d, f.n
    drift = _eval_block(f, env, f.qd + f.pd,
                        [f"QD[{i}]" for i in range(d)] + [f"PD[{i}]" for i in range(d)], batch)
    rows = f.qs + f.ps
    flat = [e for row in rows for e in row]
    names = [f"{blk}[{i}][{j}]" for blk in ("QS", "PS") for i in range(d) for j in range(n)]
    diffusion = _eval_block(f, env, flat, names, batch).reshape((2 * d, n) + batch)
    return drift, diffusion


def jacobians(f: StochasticField, z) -> FieldJacobians:
    """All first partials of the field at ``z``, one dual sweep per coordinate."""
    z = _as_state(f, z)
    env = env_for(f, z)
    batch = z.shape[1:]
    d, n = f.d, f.n
    coords = coordinate_names(d)
    drift = np.zeros((2 * d, 2 * d) + batch)
    diff = np.zeros((2 * d, n, 2 * d) + batch)
    comps = list(f.components())
    for k, seed in enumerate(coords):
        for idx, (name, e) in enumerate(comps):
            if seed not in ex.symbols(e):
                continue
            try:
                dv = ex.eval_dual(e, env, seed)
            except ExprError as err:
                raise ComponentError(name, err) from err
            if idx < 2 * d:
                drift[idx, k] = dv.deriv
            else:
                r = idx - 2 * d
                diff[r // n, r % n, k] = dv.deriv
    return FieldJacobians(
        dQD_dQ=drift[:d, :d], dQD_dP=drift[:d, d:],
        dPD_dQ=drift[d:, :d], dPD_dP=drift[d:, d:],
        dQS_dQ=diff[:d, :, :d], dQS_dP=diff[:d, :, d:],
        dPS_dQ=diff[d:, :, :d], dPS_dP=diff[d:, :, d:],
    )


def field_from_hamiltonian(H_D, H_S: Sequence = (), d: int = 1,
                           params: Mapping[str, float] | None = None,
                           label: str = "") -> StochasticField:
    """Canonical field of {H_D, H_S}: X_Q = dH/dP, X_P = -dH/dQ per part."""
    params = dict(params or {})

    def conv(item):
        e = ex.parse(item) if isinstance(item, str) else item
        if d == 1:
            e = ex.rename(e, {"q": "q0", "p": "p0"})
        return ex.bind_params(e, params)

    hd = conv(H_D)
    hs = [conv(h) for h in H_S]
    qn = [f"q{i}" for i in range(d)]
    pn = [f"p{i}" for i in range(d)]
    qd = tuple(ex.differentiate(hd, p) for p in pn)
    pd = tuple(ex.neg(ex.differentiate(hd, q)) for q in qn)
    qs = tuple(tuple(ex.differentiate(h, pn[i]) for h in hs) for i in range(d))
    ps = tuple(tuple(ex.neg(ex.differentiate(h, qn[i])) for h in hs) for i in range(d))
    return StochasticField(d, len(hs), qd, pd, qs, ps, params, label)


def ito_drift_correction(f: StochasticField, z) -> np.ndarray:
    """Drift correction 1/2 sum_j sum_k d sigma_ij/dz_k sigma_kj; Ito drift = drift + this."""
    z = _as_state(f, z)
    _, sigma = eval_field(f, z)
    dsigma = jacobians(f, z).diffusion_tensor()
    return 0.5 * np.einsum("ajk...,kj...->a...", dsigma, sigma)
