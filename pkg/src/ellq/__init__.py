"""Classical simulator of a residual-monitored relaxation solver for P1 Poisson problems."""

__version__ = "0.1.0"

from ellq.cases import CASE_LABELS, RhsCase, rhs_case, u_exact
from ellq.certificate import StabilityCertificate, certify, empirical_decay, lyapunov_monitor
from ellq.dynamics import RelaxState, evolve, init_cold, init_warm, residual_probability, trajectory
from ellq.errors import (
    AssemblyError,
    ConfigError,
    DenseCeilingError,
    DivergenceError,
    EllqError,
    InvalidParameterError,
    InvalidThresholdError,
    NoEntryError,
    UndefinedProbabilityError,
)
from ellq.fem import EllipticSystem, assemble_system, spectral_summary
from ellq.filters import apply_filter, degree_sweep, inverse_poly
from ellq.mesh import Mesh, build_uniform_mesh
from ellq.stopping import SolveResult, StoppingConfig, default_config, run_dynamic_solve

__all__ = [
    "__version__", "CASE_LABELS", "RhsCase", "rhs_case", "u_exact", "StabilityCertificate", "certify",
    "empirical_decay", "lyapunov_monitor", "RelaxState", "evolve", "init_cold", "init_warm",
    "residual_probability", "trajectory", "AssemblyError", "ConfigError", "DenseCeilingError",
    "DivergenceError", "EllqError", "InvalidParameterError", "InvalidThresholdError", "NoEntryError",
    "UndefinedProbabilityError", "EllipticSystem", "assemble_system", "spectral_summary", "apply_filter",
    "degree_sweep", "inverse_poly", "Mesh", "build_uniform_mesh", "SolveResult", "StoppingConfig",
    "default_config", "run_dynamic_solve",
]
