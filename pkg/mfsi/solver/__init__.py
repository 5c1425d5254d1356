"""Discrete operators, periodic solvers and diagnostics."""

from .grid import DiscreteOperators, Grid, build_grid, build_operators
from .harmonic_solver import (
    HarmonicSolver,
    crosscheck_operator_form,
    recover_pressure_constant,
    solve_periodic_linear,
)
from .liftings import LiftingSolvers
from .mfs_operator import (
    BlockOperatorSet,
    GroundSpace,
    MfsOperator,
    MfsState,
    apply_amfs,
    assemble_amfs_dense,
    build_block_operators,
    verify_decoupling,
)
from .mms import fitted_order, mms_errors, mms_generate, observed_orders
from .picard import SolveReport, nonlinear_residual, periodic_norm, phi_map, solve_fixed_point
from .spectral import (
    SpectralReport,
    block_spectra,
    compute_spectrum,
    energy_gram,
    energy_weight,
    resolvent_norm,
    resolvent_scan,
    resolvent_trend,
)
from .state import HarmonicForcing, PeriodicState
from .transform import Cutoff, build_diffeo, check_smallness, inverse_map

__all__ = [
    "BlockOperatorSet",
    "Cutoff",
    "DiscreteOperators",
    "Grid",
    "GroundSpace",
    "HarmonicForcing",
    "HarmonicSolver",
    "LiftingSolvers",
    "MfsOperator",
    "MfsState",
    "PeriodicState",
    "SolveReport",
    "SpectralReport",
    "apply_amfs",
    "assemble_amfs_dense",
    "block_spectra",
    "build_block_operators",
    "build_diffeo",
    "build_grid",
    "build_operators",
    "check_smallness",
    "compute_spectrum",
    "crosscheck_operator_form",
    "fitted_order",
    "energy_gram",
    "energy_weight",
    "inverse_map",
    "mms_errors",
    "mms_generate",
    "nonlinear_residual",
    "observed_orders",
    "periodic_norm",
    "phi_map",
    "recover_pressure_constant",
    "resolvent_norm",
    "resolvent_scan",
    "resolvent_trend",
    "solve_fixed_point",
    "solve_periodic_linear",
    "verify_decoupling",
]
