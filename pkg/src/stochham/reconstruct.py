"""Recover {H_D, H_S} from a Hamiltonian field by integrating along rays.

    H_D(z) = int_0^1 [ p . X_QD(l z) - q . X_PD(l z) ] dl
    H_S(z) = int_0^1 [ p . X_QS(l z) - q . X_PS(l z) ] dl   (per channel)

The ray integral needs the field on the whole segment from 0 to z, i.e. a
domain star-shaped about the origin. It fixes the additive constant so that
H(0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import ComponentError, StochasticField, eval_field, jacobians
from .helmholtz import DEFAULT_TOL, HelmholtzReport, SamplingConfig, check_field, sample_points
from .quadrature import QuadratureRule, gauss_legendre

DEFAULT_NODES = 20


class ReconstructionError(Exception):
    pass


class NotHamiltonianError(ReconstructionError):
    def __init__(self, report: HelmholtzReport):
        self.report = report
        worst = max(zip(report.max_residuals.as_rows(), report.max_residuals.names()))
        super().__init__(
            f"field failed the integrability check ({worst[1]} = {worst[0]:.3g} > tol "
            f"{report.tol:g}); refusing to reconstruct without force")


class NodeDomainError(ReconstructionError):
    """The field cannot be evaluated at some quadrature node ``lam * z``."""

    def __init__(self, lam: float, cause: ComponentError):
        self.lam = lam
        self.cause = cause
        super().__init__(f"field not evaluable on the ray at lambda={lam!r}: {cause}")


def _rule(rule) -> QuadratureRule:
    if rule is None:
        return gauss_legendre(DEFAULT_NODES)
    if isinstance(rule, int):
        return gauss_legendre(rule)
    return rule


def _on_ray(fn, f, z, rule):
    """Call ``fn(f, lam * z)`` for all nodes at once; shape (2d, m, ...)."""
    lam = rule.nodes.reshape((1, -1) + (1,) * (z.ndim - 1))
    zz = lam * z[:, None]
    try:
        return fn(f, zz)
    except ComponentError:
        for l in rule.nodes:
            try:
                fn(f, l * z)
            except ComponentError as err:
                raise NodeDomainError(float(l), err) from err
        raise


def reconstruct_hd(f: StochasticField, z, rule=None) -> np.ndarray:
    rule = _rule(rule)
    z = np.asarray(z, dtype=float)
    d = f.d
    drift, _ = _on_ray(eval_field, f, z, rule)
    q, p = z[:d, None], z[d:, None]
    integrand = (p * drift[:d] - q * drift[d:]).sum(axis=0)
    return rule.integrate(integrand)


def reconstruct_hs(f: StochasticField, z, rule=None) -> np.ndarray:
    """Per-channel diffusion Hamiltonian, shape (n, ...)."""
    rule = _rule(rule)
    z = np.asarray(z, dtype=float)
    d = f.d
    if f.n == 0:
        return np.zeros((0,) + z.shape[1:])
    _, sigma = _on_ray(eval_field, f, z, rule)  # (2d, n, m, ...)
    q, p = z[:d, None, None], z[d:, None, None]
    integrand = (p * sigma[:d] - q * sigma[d:]).sum(axis=0)  # (n, m, ...)
    return rule.integrate(np.moveaxis(integrand, 1, 0))


@dataclass(frozen=True)
class HamiltonianGradient:
    dHD_dQ: np.ndarray  # (d, ...)
    dHD_dP: np.ndarray
    dHS_dQ: np.ndarray  # (n, d, ...)
    dHS_dP: np.ndarray


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Quadrature-backed evaluators for the reconstructed pair {H_D, H_S}."""

    field: StochasticField
    rule: QuadratureRule

    def hd(self, z) -> np.ndarray:
        return reconstruct_hd(self.field, z, self.rule)

    def hs(self, z) -> np.ndarray:
        return reconstruct_hs(self.field, z, self.rule)

    def gradient(self, z) -> HamiltonianGradient:
        return hamiltonian_gradient(self, z)


def hamiltonian_gradient(h: Hamiltonian, z) -> HamiltonianGradient:
    """Differentiate the quadrature sum itself, using exact field partials at the nodes.

    d/dz_k [p . X_Q(l z) - q . X_P(l z)]
        = [k is p_i] X_Q,i(l z) - [k is q_i] X_P,i(l z)
          + l (p . dX_Q/dz_k - q . dX_P/dz_k)(l z)
    """
    f, rule = h.field, h.rule
    z = np.asarray(z, dtype=float)
    d, n = f.d, f.n
    drift, sigma = _on_ray(eval_field, f, z, rule)
    jac = _on_ray(jacobians, f, z, rule)
    lam = rule.nodes.reshape((-1,) + (1,) * (z.ndim - 1))
    q, p = z[:d, None], z[d:, None]

    Dmu = jac.drift_matrix()  # (2d, 2d, m, ...)
    # sum_i p_i dXQ_i/dz_k - q_i dXP_i/dz_k  -> (2d, m, ...)
    inner = (p[:, None] * Dmu[:d] - q[:, None] * Dmu[d:]).sum(axis=0)
    direct = np.concatenate([-drift[d:], drift[:d]], axis=0)
    gD = rule.integrate(np.moveaxis(direct + lam * inner, 1, 0))  # (2d, ...)

    if n:
        Dsig = jac.diffusion_tensor()  # (2d, n, 2d, m, ...)
        pp, qq = z[d:, None, None, None], z[:d, None, None, None]
        inner_s = (pp * Dsig[:d] - qq * Dsig[d:]).sum(axis=0)  # (n, 2d, m, ...)
        direct_s = np.concatenate([-sigma[d:], sigma[:d]], axis=0)  # (2d, n, m, ...)
        integrand = direct_s.swapaxes(0, 1) + lam * inner_s  # (n, 2d, m, ...)
        gS = rule.integrate(np.moveaxis(integrand, 2, 0))  # (n, 2d, ...)
    else:
        gS = np.zeros((0, 2 * d) + z.shape[1:])
    return HamiltonianGradient(gD[:d], gD[d:], gS[:, :d], gS[:, d:])


def reconstruct(f: StochasticField, rule=None, sampling: SamplingConfig | None = None,
                tol: float = DEFAULT_TOL, force: bool = False) -> Hamiltonian:
    """Build the Hamiltonian after confirming the integrability conditions.

    Raises :class:`NotHamiltonianError` unless the check passes or ``force``
    is set; forced reconstructions of non-Hamiltonian fields are meaningless
    and exist to show exactly that.
    """
    if not force:
        report = check_field(f, sampling, tol)
        if not report.hamiltonian:
            raise NotHamiltonianError(report)
    return Hamiltonian(f, _rule(rule))


def gradient_mismatch(h: Hamiltonian, z) -> np.ndarray:
    """Pointwise max |grad H - (+-X)| over all components, shape (...)."""
    f = h.field
    d = f.d
    drift, sigma = eval_field(f, z)
    g = h.gradient(z)
    errs = [np.abs(g.dHD_dP - drift[:d]), np.abs(g.dHD_dQ + drift[d:])]
    if f.n:
        errs.append(np.abs(g.dHS_dP - sigma[:d].swapaxes(0, 1)))
        errs.append(np.abs(g.dHS_dQ + sigma[d:].swapaxes(0, 1)))
    return np.max([e.reshape((-1,) + np.shape(z)[1:]).max(axis=0) for e in errs], axis=0)


def roundtrip_residual(f: StochasticField, sampling: SamplingConfig | None = None,
                       rule=None) -> float:
    """Max over sampled points of the gradient identities' violation."""
    sampling = sampling or SamplingConfig()
    pts = sample_points(f.d, sampling)
    h = Hamiltonian(f, _rule(rule))
    return float(gradient_mismatch(h, pts).max()) if pts.shape[1] else 0.0


def poisson_brackets(h: Hamiltonian, z) -> np.ndarray:
    """{H_D, H_S[j]} = dH_D/dQ . dH_S[j]/dP - dH_D/dP . dH_S[j]/dQ, shape (n, ...)."""
    g = h.gradient(z)
    return (g.dHD_dQ[None] * g.dHS_dP - g.dHD_dP[None] * g.dHS_dQ).sum(axis=1)
