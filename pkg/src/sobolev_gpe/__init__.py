"""Adaptive-metric Sobolev gradient descent for Gross-Pitaevskii-type
ground states, with a diagnostics suite that certifies the convergence
behavior numerically."""

from .__about__ import __version__
from .errors import (ConfigurationError, DiagnosticError, DimensionError, DomainError,
                     EigensolverError, NonConvergenceError, NumericError, OperatorError,
                     SobolevGpeError, SolverError)
from .grid import (DisorderSpec, GridSpec, Potential, assemble_laplacian, build_grid,
                   disordered_potential, export_nodes_csv, l2h_inner, l2h_norm,
                   potential_from_json, potential_to_json, single_well_potential)
from .linsolve import CgConfig, CgStats, EigenPair, cg_solve, greens_apply, smallest_eigenpairs
from .manifold import ManifoldGradient, State, manifold_gradient, retract, tangent_project
from .operators import (ModelParams, a_u_inner, a_u_norm, assemble_A_u, assemble_a0,
                        eigenvalue_estimate, energy, residual_norm)
from .solver import (InitStrategy, IterationTrace, SolverConfig, baseline_a0_pgd_step,
                     initialize, iterations_to_error, run, run_baseline, sobolev_pgd_step,
                     trace_from_csv)
from .sparse import SparseOperator
from . import diagnostics

__all__ = [name for name in dir() if not name.startswith("_")]
