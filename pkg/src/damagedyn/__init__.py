"""Two-phase brittle damage in scalar elastodynamics: incremental minimization,
energy audits, and relaxation/homogenization checks on P1 triangle meshes."""

from .config import Config, build_problem, load_config, parse_config
from .damage import DamageState, MaterialParams, minimize_damage_given_u, threshold_audit, validate_initial_damage
from .dynamics import DamageDynamics, DynamicState, Trajectory, run_dynamics
from .energy import audit_inequality, audit_trajectory, build_ledger, step_identity_residual
from .errors import (
    ConfigError,
    DamageDynError,
    DomainError,
    InitialDamageError,
    OracleCapError,
    SolverError,
    StepError,
)
from .fem import Mesh, assemble_mass, assemble_stiffness, build_mesh, build_periodic_mesh, solve_spd
from .relaxation import W_density, W_relaxed, effective_tensor, laminate_for_gradient, relaxed_via_lamination_oracle

__version__ = "0.1.0"

__all__ = [
    "Config", "build_problem", "load_config", "parse_config",
    "DamageState", "MaterialParams", "minimize_damage_given_u", "threshold_audit", "validate_initial_damage",
    "DamageDynamics", "DynamicState", "Trajectory", "run_dynamics",
    "audit_inequality", "audit_trajectory", "build_ledger", "step_identity_residual",
    "ConfigError", "DamageDynError", "DomainError", "InitialDamageError", "OracleCapError", "SolverError", "StepError",
    "Mesh", "assemble_mass", "assemble_stiffness", "build_mesh", "build_periodic_mesh", "solve_spd",
    "W_density", "W_relaxed", "effective_tensor", "laminate_for_gradient", "relaxed_via_lamination_oracle",
]
