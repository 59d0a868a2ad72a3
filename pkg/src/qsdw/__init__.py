"""
Pseudo-spectral solver and verification harness for semilinear and
quasilinear strongly damped wave equations on boxes with Dirichlet data.

Fields are coefficient arrays in the sine eigenbasis of a :class:`Basis`.
"""
from .diagnostics import (balance_residual, diff_metrics, e_minus1_bounds, energy_norm,
                          energy_report, fit_decay)
from .errors import ConvergenceError, NonFiniteError, NumericalFailure
from .experiments import ExperimentConfig, RunResult, run_experiment
from .integrator import (EquationSpec, State, integrate, linear_modal_exact, rhs_accel,
                         step_imex, step_midpoint, step_pseudoparabolic)
from .nonlinearity import NonlinearitySpec, monotonicity_gap, validate_conditions
from .spectral import Basis, build_basis, lp_norm

__version__ = "0.1.0"

__all__ = [
    "Basis", "build_basis", "lp_norm",
    "NonlinearitySpec", "monotonicity_gap", "validate_conditions",
    "EquationSpec", "State", "integrate", "linear_modal_exact", "rhs_accel",
    "step_midpoint", "step_imex", "step_pseudoparabolic",
    "energy_report", "energy_norm", "diff_metrics", "e_minus1_bounds",
    "balance_residual", "fit_decay",
    "ExperimentConfig", "RunResult", "run_experiment",
    "NumericalFailure", "ConvergenceError", "NonFiniteError",
]
