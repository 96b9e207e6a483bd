"""Helmholtz conditions, Hamiltonian reconstruction and simulation for stochastic Hamiltonian systems."""

__version__ = "0.1.0"

from .expr import DomainError, DualValue, EvalEnv, eval_dual, evaluate, differentiate, parse, to_source
from .field import (FieldJacobians, PhasePoint, StochasticField, eval_field, field_from_hamiltonian,
                    ito_drift_correction, jacobians)
from .fieldfile import format_field, load_field, parse_field_text
from .helmholtz import ConditionResiduals, HelmholtzReport, SamplingConfig, check_conditions_at, check_field
from .quadrature import QuadratureRule, gauss_legendre
from .reconstruct import (Hamiltonian, hamiltonian_gradient, poisson_brackets, reconstruct, reconstruct_hd,
                          reconstruct_hs, roundtrip_residual)
from .brownian import BrownianPath, sample_brownian
from .sde import IntegratorConfig, SDEPath, integrate, step_heun, step_midpoint, stratonovich_integral
from .verify import TangentFlow, VerificationReport, VerifyConfig, energy_drift, symplectic_residual, \
    tangent_flow, verify_field
