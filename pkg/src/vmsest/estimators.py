"""scikit-learn style facade over the solver and estimator modules.

    >>> model = StabilizedCDR(formulation="osgs").fit(build_unit_square_mesh(16), case.params)
    >>> model.predict([[0.5, 0.25]])
    >>> model.estimate().eta
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .assembly import PhysicalParams
from .estimator import EstimatorMode, EstimatorReport, estimate
from .formulations import Discretization, FormulationKind, SolveInfo, StabConstants, compute_tau, solve_formulation
from .linalg import Method, Preconditioner, SolverConfig
from .mesh import Mesh
from .projection import ProjectionSpace


class StabilizedCDR(RegressorMixin, BaseEstimator):
    """Q1 solution of ``-k lap u + a.grad u + s u = f`` on a structured mesh.

    Hyperparameters are plain constructor arguments so ``get_params`` /
    ``set_params`` / ``clone`` work as usual. ``fit`` takes the mesh and the
    physical parameters; ``predict`` evaluates the discrete solution at
    points of shape (n, 2).
    """

    def __init__(self, formulation="osgs", edge_term=True, f_in_residual=True,
                 projection_space="constrained", osgs_solver="block",
                 c1=4.0, c2=2.0, c3=1.0, c4=1.0 / 3.0,
                 method="bicgstab", preconditioner="ilu0", rel_tol=1e-10, max_iter=None):
        self.formulation = formulation
        self.edge_term = edge_term
        self.f_in_residual = f_in_residual
        self.projection_space = projection_space
        self.osgs_solver = osgs_solver
        self.c1 = c1
        self.c2 = c2
        self.c3 = c3
        self.c4 = c4
        self.method = method
        self.preconditioner = preconditioner
        self.rel_tol = rel_tol
        self.max_iter = max_iter

    def _kind(self) -> FormulationKind:
        return FormulationKind(self.formulation, bool(self.edge_term), bool(self.f_in_residual),
                               ProjectionSpace(self.projection_space), self.osgs_solver)

    def _solver(self) -> SolverConfig:
        return SolverConfig(Method(self.method), self.rel_tol, self.max_iter, Preconditioner(self.preconditioner))

    def fit(self, mesh: Mesh, params: PhysicalParams):
        if not isinstance(mesh, Mesh):
            raise TypeError(f"expected a Mesh, got {type(mesh).__name__}")
        if not isinstance(params, PhysicalParams):
            raise TypeError(f"expected PhysicalParams, got {type(params).__name__}")
        kind = self._kind()
        constants = StabConstants(self.c1, self.c2, self.c3, self.c4)
        self.mesh_ = mesh
        self.params_ = params
        self.disc_ = Discretization.build(mesh, params)
        self.stab_ = compute_tau(params, mesh.h, constants)
        self.info_ = SolveInfo()
        self.solution_ = solve_formulation(self.disc_, self.stab_, kind, self._solver(), self.info_)
        self.n_dofs_ = self.disc_.dofs.n_free
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "solution_")
        X = check_array(X, dtype=float)
        if X.shape[1] != 2:
            raise ValueError(f"points must have 2 columns, got {X.shape[1]}")
        return self.solution_(X[:, 0], X[:, 1])

    def estimate(self, mode: str | EstimatorMode | None = None) -> EstimatorReport:
        """Error estimator of the fitted solution; mode defaults to the formulation."""
        check_is_fitted(self, "solution_")
        if mode is None:
            mode = "asgs" if self.formulation == "asgs" else "osgs"
        ws = self.disc_.workspace(ProjectionSpace(self.projection_space))
        return estimate(ws, self.params_, self.stab_, self.solution_, mode)
