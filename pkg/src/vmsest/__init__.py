"""Stabilized Q1 finite elements for convection-diffusion-reaction with
residual-based a posteriori error estimation (ASGS / OSGS)."""

from .assembly import PhysicalParams
from .cases import CASES, BenchmarkCase, ExactSolution, get_case
from .estimator import EstimatorMode, EstimatorReport, effectivity, error_norms, estimate
from .estimators import StabilizedCDR
from .fields import FeFunction
from .formulations import (
    Discretization, FormulationKind, Kind, StabConstants, StabParams, compute_tau, solve_formulation,
    solve_stabilized,
)
from .linalg import Method, Preconditioner, SolverConfig, SolverError
from .mesh import Mesh, build_lshape_mesh, build_unit_square_mesh
from .projection import ProjectionSpace, ProjectionWorkspace, l2_project
from .study import ConvergenceTable, StudyConfig, run_study

__all__ = [
    "PhysicalParams", "CASES", "BenchmarkCase", "ExactSolution", "get_case",
    "EstimatorMode", "EstimatorReport", "effectivity", "error_norms", "estimate",
    "StabilizedCDR", "FeFunction", "Discretization", "FormulationKind", "Kind",
    "StabConstants", "StabParams", "compute_tau", "solve_formulation", "solve_stabilized",
    "Method", "Preconditioner", "SolverConfig", "SolverError",
    "Mesh", "build_lshape_mesh", "build_unit_square_mesh",
    "ProjectionSpace", "ProjectionWorkspace", "l2_project",
    "ConvergenceTable", "StudyConfig", "run_study",
]
