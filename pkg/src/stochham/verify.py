"""Trajectory-level checks: symplecticity of the tangent flow and conservation of H_D.

Thresholds below are engineering choices, not derived bounds.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .brownian import BrownianPath, sample_brownian
from .field import StochasticField
from .helmholtz import DEFAULT_TOL, HelmholtzReport, SamplingConfig, check_field, sample_points
from .reconstruct import DEFAULT_NODES, Hamiltonian, poisson_brackets, roundtrip_residual
from .quadrature import gauss_legendre
from .sde import IntegratorConfig, SDEPath, integrate_batch


def symplectic_matrix(d: int) -> np.ndarray:
    """J = [[0, I], [-I, 0]]."""
    eye = np.eye(d)
    zero = np.zeros((d, d))
    return np.block([[zero, eye], [-eye, zero]])


def _check_J():
    for d in (1, 2, 3):
        J = symplectic_matrix(d)
        assert np.array_equal(J @ J, -np.eye(2 * d)), "J^2 != -I"
        assert np.array_equal(J.T, -J) and np.abs(J).max() == 1.0


_check_J()


@dataclass(frozen=True, eq=False)
class TangentFlow:
    times: np.ndarray  # (N + 1,)
    U: np.ndarray  # (N + 1, 2d, 2d)
    brownian: BrownianPath | None = None


def tangent_flow(f: StochasticField, z0, cfg: IntegratorConfig, bp: BrownianPath) -> TangentFlow:
    res = integrate_batch(f, z0, cfg, [bp], tangent=True)
    return TangentFlow(res.times, res.tangents[..., 0], bp)


def symplectic_defect(U: np.ndarray) -> np.ndarray:
    """||U^T J U - J||_max for U of shape (..., 2d, 2d)."""
    U = np.asarray(U, dtype=float)
    J = symplectic_matrix(U.shape[-1] // 2)
    M = np.swapaxes(U, -1, -2) @ J @ U - J
    return np.abs(M).max(axis=(-1, -2))


def symplectic_residual(tf) -> float:
    """Max over saved times; accepts a TangentFlow or a raw (…, 2d, 2d) array."""
    U = tf.U if isinstance(tf, TangentFlow) else np.asarray(tf)
    return float(np.max(symplectic_defect(U)))


def energy_drift(f: StochasticField, h: Hamiltonian, path: SDEPath) -> np.ndarray:
    """Series H_D(Z_t) - H_D(Z_0) along ``path``."""
    if h.field is not f:
        raise ValueError("Hamiltonian was not built from this field")
    H = h.hd(path.states.T)
    return H - H[0]


@dataclass(frozen=True)
class VerifyConfig:
    integrator: IntegratorConfig = IntegratorConfig()
    T: float = 1.0
    h: float = 1e-3
    paths: int = 100
    seed: int = 0
    z0: tuple | None = None  # default: q = 1, p = 0
    sampling: SamplingConfig = SamplingConfig()
    check_tol: float = DEFAULT_TOL
    nodes: int = DEFAULT_NODES
    roundtrip_tol: float = 1e-9
    symplectic_tol: float = 1e-8
    energy_tol: float = 1e-8
    bracket_tol: float = 1e-9

    @property
    def steps(self) -> int:
        return max(1, int(round(self.T / self.h)))


@dataclass
class VerificationReport:
    scheme: str
    h: float
    T: float
    paths: int
    seed: int
    check: HelmholtzReport
    roundtrip_residual: float | None
    bracket_max: float | None
    symplectic_residual_max: float
    energy_drift_max: float | None
    energy_checked: bool
    energy_status: str  # enforced | reported | SKIPPED
    symplectic_asserted: bool
    failed_stage: str | None
    times: np.ndarray = field(repr=False, default=None)
    symplectic_series: np.ndarray = field(repr=False, default=None)  # max over paths per time
    energy_series: np.ndarray | None = field(repr=False, default=None)
    per_path_symplectic: np.ndarray = field(repr=False, default=None)

    @property
    def passed(self) -> bool:
        return self.failed_stage is None

    def to_text(self) -> str:
        def fmt(x):
            return "-" if x is None else repr(float(x))

        kv = [
            ("field", self.check.label or "-"),
            ("scheme", self.scheme),
            ("h", fmt(self.h)),
            ("T", fmt(self.T)),
            ("paths", self.paths),
            ("seed", self.seed),
            ("check.verdict", self.check.verdict),
            ("check.max_residual", fmt(self.check.max_residuals.max())),
            ("roundtrip_residual", fmt(self.roundtrip_residual)),
            ("bracket_max", fmt(self.bracket_max)),
            ("symplectic_residual_max", fmt(self.symplectic_residual_max)),
            ("symplectic_assertion", "enforced" if self.symplectic_asserted else "reported"),
            ("energy_drift_max", fmt(self.energy_drift_max)),
            ("energy_check", self.energy_status),
            ("result", "pass" if self.passed else "fail"),
            ("stage", self.failed_stage or "-"),
        ]
        lines = ["# stochham verification report v1"]
        lines += [f"{k} = {v}" for k, v in kv]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,symplectic_residual,hd_drift\n")
        for k, t in enumerate(self.times):
            e = "" if self.energy_series is None else repr(float(self.energy_series[k]))
            buf.write(f"{float(t)!r},{float(self.symplectic_series[k])!r},{e}\n")
        return buf.getvalue()


def default_z0(f: StochasticField) -> np.ndarray:
    z0 = np.zeros(2 * f.d)
    z0[:f.d] = 1.0
    return z0


def verify_field(f: StochasticField, cfg: VerifyConfig = VerifyConfig()) -> VerificationReport:
    """Check, reconstruct, then simulate ``cfg.paths`` tangent flows and H_D along them.

    Symplecticity and energy conservation are asserted only for the midpoint
    scheme; Heun results are reported. Energy is asserted only when every
    sampled Poisson bracket {H_D, H_S[j]} is below ``bracket_tol``.
    """
    failed = None
    report = check_field(f, cfg.sampling, cfg.check_tol)
    hamiltonian = None
    rt = brackets = None
    if not report.hamiltonian:
        failed = "check"
    else:
        rule = gauss_legendre(cfg.nodes)
        hamiltonian = Hamiltonian(f, rule)
        rt = roundtrip_residual(f, cfg.sampling, rule)
        if rt > cfg.roundtrip_tol:
            failed = "reconstruct"
        if f.n:
            pts = sample_points(f.d, cfg.sampling)
            brackets = float(np.abs(poisson_brackets(hamiltonian, pts)).max())
        else:
            brackets = 0.0

    z0 = np.asarray(cfg.z0 if cfg.z0 is not None else default_z0(f), dtype=float)
    N = cfg.steps
    paths = [sample_brownian(f.n, 0.0, cfg.T, N, cfg.seed, i) for i in range(cfg.paths)]
    integ = IntegratorConfig(cfg.integrator.scheme, None, cfg.integrator.newton_tol,
                             cfg.integrator.max_iters)
    res = integrate_batch(f, z0, integ, paths, tangent=True)
    defect = symplectic_defect(np.moveaxis(res.tangents, -1, 1))  # (N + 1, P)
    sym_max = float(defect.max())
    midpoint = integ.scheme == "midpoint"
    if failed is None and midpoint and sym_max > cfg.symplectic_tol:
        failed = "symplectic"

    energy_checked = False
    energy_status = "SKIPPED"
    e_series = None
    e_max = None
    if hamiltonian is not None:
        H = hamiltonian.hd(np.moveaxis(res.states, 1, 0))  # (N + 1, P)
        drift = np.abs(H - H[0])
        e_series = drift.max(axis=1)
        e_max = float(drift.max())
        commuting = brackets is not None and brackets <= cfg.bracket_tol
        energy_checked = midpoint and commuting
        if commuting:
            energy_status = "enforced" if midpoint else "reported"
        if failed is None and energy_checked and e_max > cfg.energy_tol:
            failed = "energy"

    return VerificationReport(
        scheme=integ.scheme, h=cfg.T / N, T=cfg.T, paths=cfg.paths, seed=cfg.seed,
        check=report, roundtrip_residual=rt, bracket_max=brackets,
        symplectic_residual_max=sym_max, energy_drift_max=e_max,
        energy_checked=energy_checked, energy_status=energy_status, symplectic_asserted=midpoint, failed_stage=failed,
        times=res.times, symplectic_series=defect.max(axis=1), energy_series=e_series,
        per_path_symplectic=defect[-1],
    )
