"""Global L2 projection onto the Q1 space and its orthogonal complement."""

from __future__ import annotations

import enum

import numpy as np

from .assembly import fe_values, integrate_against, restrict
from .fields import ElementField, FeFunction
from .linalg import MASS_SOLVER, Factorized, SolverConfig
from .mesh import DofMap, Mesh
from .quadrature import element_tables


class ProjectionSpace(str, enum.Enum):
    # all Q1 functions (boundary nodes included)
    FULL = "full"
    # Q1 functions vanishing on the Dirichlet boundary
    CONSTRAINED = "constrained"


class ProjectionWorkspace:
    """Consistent mass matrix of the target space with a cached solver."""

    def __init__(self, mesh: Mesh, dofs: DofMap, M_full, space=ProjectionSpace.CONSTRAINED,
                 solver: SolverConfig = MASS_SOLVER):
        self.mesh = mesh
        self.dofs = dofs
        self.space = ProjectionSpace(space)
        if self.space is ProjectionSpace.FULL:
            self.nodes = np.arange(mesh.n_nodes)
        else:
            self.nodes = dofs.free_nodes
        self.M = restrict(M_full, self.nodes, self.nodes)
        self.solver = Factorized(self.M, solver)
        self.iterations = 0

    @property
    def n(self) -> int:
        return len(self.nodes)

    def moments(self, w: ElementField) -> np.ndarray:
        """``b_p = sum_K <phi_p, w>_K`` over the target space."""
        t = element_tables(w.order, self.mesh.h)
        return integrate_against(self.mesh, w.evaluate(t), t)[self.nodes]

    def solve_mass(self, b) -> np.ndarray:
        res = self.solver.solve(b)
        self.iterations += res.iterations
        return res.x

    def function(self, coefficients) -> FeFunction:
        return FeFunction(self.mesh, np.asarray(coefficients, dtype=float), self.nodes)


def as_field(w, order: int | None = None) -> ElementField:
    if isinstance(w, ElementField):
        return w
    if isinstance(w, FeFunction):
        nodal = w.nodal_values()
        return ElementField(lambda t: fe_values(w.mesh, nodal, t), order or 2)
    raise TypeError(f"cannot project object of type {type(w).__name__}")


def l2_project(ws: ProjectionWorkspace, w) -> FeFunction:
    """``P_h w``: the p with ``(p, v_h) = (w, v_h)`` for all v_h in the target space."""
    w = as_field(w)
    return ws.function(ws.solve_mass(ws.moments(w)))


def orthogonality_residual(ws: ProjectionWorkspace, w, p: FeFunction) -> np.ndarray:
    """``(w - p, phi_i)`` for every basis function of the target space."""
    w = as_field(w)
    return ws.moments(w) - ws.M @ p.coefficients


def orthogonal_values(ws: ProjectionWorkspace, w, order: int | None = None) -> np.ndarray:
    """Values of ``w - P_h w`` at the quadrature points of the given order."""
    w = as_field(w)
    order = order or w.order
    p = l2_project(ws, w)
    t = element_tables(order, ws.mesh.h)
    return w.evaluate(t) - fe_values(ws.mesh, p.nodal_values(), t)


def orthogonal_component_element_norms(ws: ProjectionWorkspace, w) -> np.ndarray:
    """Per element ``||P_h^perp w||_K^2``, clamped at zero."""
    w = as_field(w)
    t = element_tables(w.order, ws.mesh.h)
    r = orthogonal_values(ws, w)
    return np.maximum((r**2) @ t.weights, 0.0)


def element_norms(mesh: Mesh, w) -> np.ndarray:
    """Per element ``||w||_K^2``."""
    w = as_field(w)
    t = element_tables(w.order, mesh.h)
    return (w.evaluate(t) ** 2) @ t.weights
