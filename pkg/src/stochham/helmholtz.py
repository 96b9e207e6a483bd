"""Pointwise check of the stochastic integrability conditions.

For a field X = {X_D, X_S} the conditions are

* trace:     dX_QD/dQ + (dX_PD/dP)^T = 0, and per channel j
             dX_QS/dQ + (dX_PS/dP)^T' = 0,
* symmetry:  dX_QD/dP and dX_PD/dQ symmetric, and per channel the same
             for dX_QS/dP and dX_PS/dQ,

where for the (i, j, k) diffusion tensors ``^T'`` swaps i and k at fixed
channel j. With n = 0 only the three drift conditions remain, which are the
classical Hamiltonian integrability conditions.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .field import ComponentError, FieldJacobians, PhasePoint, StochasticField, coordinate_names, jacobians

DEFAULT_TOL = 1e-9

HAMILTONIAN = "hamiltonian"
NOT_HAMILTONIAN = "not_hamiltonian"


class CheckError(Exception):
    """The field could not be evaluated on enough of the sampling box."""


@dataclass(frozen=True)
class SamplingConfig:
    radius: float = 2.0
    points: int = 128
    seed: int = 0
    extra_points: Sequence = ()

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.points < 0:
            raise ValueError("points must be non-negative")


def sample_points(d: int, sampling: SamplingConfig) -> np.ndarray:
    """Seeded uniform points in [-R, R]^{2d} followed by user points, shape (2d, m)."""
    rng = np.random.default_rng(sampling.seed)
    pts = rng.uniform(-sampling.radius, sampling.radius, size=(sampling.points, 2 * d)).T
    if len(sampling.extra_points):
        extra = np.array([np.asarray(z, dtype=float) for z in sampling.extra_points]).T
        if extra.shape[0] != 2 * d:
            raise ValueError(f"user points must have {2 * d} coordinates")
        pts = np.concatenate([pts, extra], axis=1)
    return pts


@dataclass(frozen=True)
class ConditionResiduals:
    trace_D: float | np.ndarray
    sym_QD: float | np.ndarray
    sym_PD: float | np.ndarray
    trace_S: np.ndarray  # (n,) or (n, m)
    sym_QS: np.ndarray
    sym_PS: np.ndarray

    def names(self) -> list[str]:
        n = len(self.trace_S)
        return (["trace_D", "sym_QD", "sym_PD"]
                + [f"trace_S[{j}]" for j in range(n)]
                + [f"sym_QS[{j}]" for j in range(n)]
                + [f"sym_PS[{j}]" for j in range(n)])

    def as_rows(self) -> np.ndarray:
        """Stack every condition into one array, ordered as :meth:`names`."""
        return np.concatenate([
            np.asarray([self.trace_D, self.sym_QD, self.sym_PD]),
            np.asarray(self.trace_S), np.asarray(self.sym_QS), np.asarray(self.sym_PS),
        ])

    def max(self) -> float:
        rows = self.as_rows()
        return float(rows.max()) if rows.size else 0.0


def residuals_from_jacobians(jac: FieldJacobians) -> ConditionResiduals:
    """Max-norm residual of each condition; keeps any trailing batch axes."""
    def tr(m):  # (d, d, ...) matrix transpose
        return m.swapaxes(0, 1)

    def ttr(t):  # (i, j, k, ...) -> (k, j, i, ...)
        return t.swapaxes(0, 2)

    trace_D = np.abs(jac.dQD_dQ + tr(jac.dPD_dP)).max(axis=(0, 1))
    sym_QD = np.abs(jac.dQD_dP - tr(jac.dQD_dP)).max(axis=(0, 1))
    sym_PD = np.abs(jac.dPD_dQ - tr(jac.dPD_dQ)).max(axis=(0, 1))
    n = jac.dQS_dQ.shape[1]
    if n:
        trace_S = np.abs(jac.dQS_dQ + ttr(jac.dPS_dP)).max(axis=(0, 2))
        sym_QS = np.abs(jac.dQS_dP - ttr(jac.dQS_dP)).max(axis=(0, 2))
        sym_PS = np.abs(jac.dPS_dQ - ttr(jac.dPS_dQ)).max(axis=(0, 2))
    else:
        empty = np.zeros((0,) + jac.dQD_dQ.shape[2:])
        trace_S = sym_QS = sym_PS = empty
    return ConditionResiduals(trace_D, sym_QD, sym_PD, trace_S, sym_QS, sym_PS)


def check_conditions_at(f: StochasticField, z) -> ConditionResiduals:
    r = residuals_from_jacobians(jacobians(f, np.asarray(z, dtype=float)))
    return ConditionResiduals(float(r.trace_D), float(r.sym_QD), float(r.sym_PD),
                              np.asarray(r.trace_S), np.asarray(r.sym_QS), np.asarray(r.sym_PS))


@dataclass
class HelmholtzReport:
    verdict: str
    tol: float
    points_checked: int
    max_residuals: ConditionResiduals
    worst_point: PhasePoint | None
    per_condition_verdicts: dict[str, bool]
    sampling: SamplingConfig
    d: int
    n: int
    label: str = ""
    skipped: list[tuple[np.ndarray, str]] = field(default_factory=list)
    points: np.ndarray | None = field(default=None, repr=False)  # (2d, m)
    pointwise: np.ndarray | None = field(default=None, repr=False)  # (conditions, m)

    @property
    def hamiltonian(self) -> bool:
        return self.verdict == HAMILTONIAN

    def to_text(self) -> str:
        """Key-value report; see README for the schema."""
        out = ["# stochham helmholtz report v1"]
        kv = [
            ("field", self.label or "-"),
            ("d", self.d),
            ("n", self.n),
            ("verdict", self.verdict),
            ("tol", _fmt(self.tol)),
            ("sampling.radius", _fmt(self.sampling.radius)),
            ("sampling.points", self.sampling.points),
            ("sampling.seed", self.sampling.seed),
            ("points_checked", self.points_checked),
            ("points_skipped", len(self.skipped)),
        ]
        names = self.max_residuals.names()
        rows = self.max_residuals.as_rows()
        for name, value in zip(names, rows):
            kv.append((f"residual.{name}", _fmt(value)))
        for name in names:
            kv.append((f"pass.{name}", "yes" if self.per_condition_verdicts[name] else "no"))
        if self.worst_point is not None:
            coords = coordinate_names(self.d)
            kv.append(("worst_point", " ".join(f"{c}={_fmt(v)}" for c, v in zip(coords, self.worst_point.z))))
        for z, reason in self.skipped:
            kv.append(("skipped", " ".join(_fmt(v) for v in z) + f" ({reason})"))
        out.extend(f"{k} = {v}" for k, v in kv)
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        """Per-point residuals, one row per evaluated point."""
        if self.points is None or self.pointwise is None:
            raise ValueError("report carries no per-point data")
        buf = io.StringIO()
        buf.write(",".join(["point"] + coordinate_names(self.d) + self.max_residuals.names()) + "\n")
        for m in range(self.points.shape[1]):
            vals = [str(m)] + [_fmt(v) for v in self.points[:, m]] + [_fmt(v) for v in self.pointwise[:, m]]
            buf.write(",".join(vals) + "\n")
        return buf.getvalue()


def _fmt(x) -> str:
    return repr(float(x))


def _evaluable(f, pts):
    """Split points into (good_points, skipped) by trying each one alone."""
    good, skipped = [], []
    for m in range(pts.shape[1]):
        try:
            jacobians(f, pts[:, m])
        except ComponentError as err:
            skipped.append((pts[:, m].copy(), str(err)))
        else:
            good.append(m)
    return pts[:, good], skipped


def check_field(f: StochasticField, sampling: SamplingConfig | None = None,
                tol: float = DEFAULT_TOL) -> HelmholtzReport:
    """Evaluate every condition on sampled points and decide whether f is Hamiltonian."""
    sampling = sampling or SamplingConfig()
    pts = sample_points(f.d, sampling)
    total = pts.shape[1]
    skipped: list = []
    try:
        jac = jacobians(f, pts)
    except ComponentError:
        pts, skipped = _evaluable(f, pts)
        if len(skipped) > 0.1 * total:
            raise CheckError(
                f"{len(skipped)} of {total} sample points could not be evaluated; "
                f"field is not well defined on the box (first: {skipped[0][1]})")
        jac = jacobians(f, pts)
    res = residuals_from_jacobians(jac)
    pointwise = res.as_rows()  # (conditions, m)
    names = res.names()
    if pts.shape[1]:
        maxima = pointwise.max(axis=1)
        worst = int(np.argmax(pointwise.max(axis=0)))
        worst_point = PhasePoint.from_z(pts[:, worst])
    else:
        maxima = np.zeros(len(names))
        worst_point = None
    n = f.n
    max_res = ConditionResiduals(float(maxima[0]), float(maxima[1]), float(maxima[2]),
                                 maxima[3:3 + n], maxima[3 + n:3 + 2 * n], maxima[3 + 2 * n:])
    per = {name: bool(v <= tol) for name, v in zip(names, maxima)}
    verdict = HAMILTONIAN if all(per.values()) else NOT_HAMILTONIAN
    return HelmholtzReport(verdict, tol, pts.shape[1], max_res, worst_point, per, sampling,
                           f.d, f.n, f.label, skipped, pts, pointwise)
