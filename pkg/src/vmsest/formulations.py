"""Stabilization parameters and the Galerkin / ASGS / OSGS discrete problems.

The stabilized bilinear form adds, per element,

    tau_K (-L* v, P(L u - f))_K  -  sum_E tau_E <k [d_n u], k [d_n v]>_E

where ``P`` is the identity (ASGS) or the orthogonal complement of the L2
projection onto the FE space (OSGS). Both ``L u_h`` and ``-L* v_h`` are
evaluated literally at quadrature points, Laplacian and reaction included.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import OperatorSet, PhysicalParams, assemble_load_full, assemble_operators, restrict
from .fields import FeFunction
from .linalg import Method, NonConvergence, Preconditioner, SolverConfig, solve
from .mesh import DofMap, Mesh
from .projection import ProjectionSpace, ProjectionWorkspace

log = logging.getLogger(__name__)

DEFAULT_SOLVER = SolverConfig(Method.BICGSTAB, preconditioner=Preconditioner.ILU0)


@dataclass(frozen=True)
class StabConstants:
    c1: float = 4.0
    c2: float = 2.0
    c3: float = 1.0
    c4: float = 1.0 / 3.0

    def __post_init__(self):
        if min(self.c1, self.c2, self.c3, self.c4) <= 0:
            raise ValueError("stabilization constants must be positive")


@dataclass(frozen=True)
class StabParams:
    tau_K: float
    tau_E: float
    tau_K0: float
    tau_E0: float


def compute_tau(params: PhysicalParams, h: float, c: StabConstants = StabConstants()) -> StabParams:
    if not h > 0:
        raise ValueError(f"mesh size must be positive, got {h}")
    inv = c.c1 * params.k / h**2 + c.c2 * params.a_norm / h + c.c3 * params.s
    inv0 = c.c1 * params.k / h**2 + c.c3 * params.s
    if not inv > 0 or not inv0 > 0:
        raise ValueError("stabilization parameter undefined for k = |a| = s = 0")
    tau_K = 1.0 / inv
    tau_K0 = 1.0 / inv0
    return StabParams(tau_K, c.c4 * tau_K / h, tau_K0, c.c4 * tau_K0 / h)


class Kind(str, enum.Enum):
    GALERKIN = "galerkin"
    ASGS = "asgs"
    OSGS = "osgs"


@dataclass(frozen=True)
class FormulationKind:
    kind: Kind = Kind.OSGS
    edge_term_enabled: bool = True
    f_in_residual: bool = True
    projection_space: ProjectionSpace = ProjectionSpace.CONSTRAINED
    # OSGS realization: "block" (monolithic) or "fixed_point"
    osgs_solver: str = "block"

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "projection_space", ProjectionSpace(self.projection_space))
        if self.osgs_solver not in ("block", "fixed_point"):
            raise ValueError(f"unknown OSGS realization {self.osgs_solver!r}")


@dataclass
class SolveInfo:
    iterations: int = 0
    residual: float = 0.0
    fixed_point_iterations: int = 0


@dataclass
class Discretization:
    """Everything assembled for one mesh and parameter set."""

    mesh: Mesh
    dofs: DofMap
    params: PhysicalParams
    ops: OperatorSet
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, mesh: Mesh, params: PhysicalParams) -> "Discretization":
        dofs = mesh.dof_map()
        return cls(mesh, dofs, params, assemble_operators(mesh, dofs, params))

    @property
    def free(self) -> np.ndarray:
        return self.dofs.free_nodes

    def load(self, basis: str = "value") -> np.ndarray:
        key = ("load", basis)
        if key not in self._cache:
            self._cache[key] = assemble_load_full(self.mesh, self.params.f, basis=basis, params=self.params)
        return self._cache[key]

    def workspace(self, space: ProjectionSpace) -> ProjectionWorkspace:
        key = ("ws", ProjectionSpace(space))
        if key not in self._cache:
            self._cache[key] = ProjectionWorkspace(self.mesh, self.dofs, self.ops.full.M_mass, space)
        return self._cache[key]

    def galerkin_matrix(self) -> sp.csr_matrix:
        o = self.ops
        return (o.K_diff + o.C_conv + self.params.s * o.M_mass).tocsr()


def solve_galerkin(mesh: Mesh, dofs: DofMap, params: PhysicalParams,
                   solver: SolverConfig = DEFAULT_SOLVER, disc: Discretization | None = None,
                   info: SolveInfo | None = None) -> FeFunction:
    disc = disc or Discretization(mesh, dofs, params, assemble_operators(mesh, dofs, params))
    b = disc.load()[disc.free]
    res = solve(disc.galerkin_matrix(), b, solver)
    if info is not None:
        info.iterations, info.residual = res.iterations, res.residual
    return FeFunction.from_free(mesh, dofs, res.x)


def asgs_matrix(disc: Discretization, stab: StabParams, edge_term: bool = True) -> sp.csr_matrix:
    """Galerkin + tau_K (-L* v, L u) [- tau_E J] over the free dofs."""
    free = disc.free
    A = disc.galerkin_matrix() + stab.tau_K * restrict(disc.ops.full.R_LL, free, free)
    if edge_term:
        A = A - stab.tau_E * disc.ops.J_edge
    return sp.csr_matrix(A)


def _stabilized_rhs(disc: Discretization, stab: StabParams, kind: FormulationKind) -> np.ndarray:
    b = disc.load("value")[disc.free]
    if kind.f_in_residual:
        b = b + stab.tau_K * disc.load("adjoint")[disc.free]
    return b


@dataclass
class OsgsSystem:
    """Pieces of the OSGS problem.

    With ``xi = P_h(L u)`` the discrete equations are

        A u - tau_K B_adj xi = b - tau_K B_adj pi_f
        M xi - B_L u = 0

    where ``A`` is the ASGS matrix and ``pi_f = P_h f``.
    """

    A: sp.csr_matrix
    B_adj: sp.csr_matrix  # free x proj
    B_L: sp.csr_matrix  # proj x free
    ws: ProjectionWorkspace
    rhs: np.ndarray
    tau_K: float

    def block(self) -> tuple[sp.csr_matrix, np.ndarray]:
        n, m = self.A.shape[0], self.ws.n
        K = sp.bmat([[self.A, -self.tau_K * self.B_adj], [-self.B_L, self.ws.M]], format="csr")
        return K, np.concatenate([self.rhs, np.zeros(m)])

    def residual(self, u) -> np.ndarray:
        """Discrete residual ``B_stab(u_h, phi_i) - L_stab(phi_i)`` after eliminating xi."""
        xi = self.ws.solve_mass(self.B_L @ u)
        return self.A @ u - self.tau_K * (self.B_adj @ xi) - self.rhs


def osgs_system(disc: Discretization, stab: StabParams, kind: FormulationKind) -> OsgsSystem:
    ws = disc.workspace(kind.projection_space)
    free, pn = disc.free, ws.nodes
    full = disc.ops.full
    B_adj = restrict(full.B_adj, free, pn)
    B_L = restrict(full.B_L, pn, free)
    rhs = _stabilized_rhs(disc, stab, kind)
    if kind.f_in_residual:
        pi_f = ws.solve_mass(disc.load("value")[pn])
        rhs = rhs - stab.tau_K * (B_adj @ pi_f)
    A = asgs_matrix(disc, stab, kind.edge_term_enabled)
    return OsgsSystem(A, B_adj, B_L, ws, rhs, stab.tau_K)


def solve_stabilized(mesh: Mesh, dofs: DofMap, params: PhysicalParams, stab: StabParams,
                     kind: FormulationKind, solver: SolverConfig = DEFAULT_SOLVER,
                     disc: Discretization | None = None, info: SolveInfo | None = None,
                     fp_tol: float = 1e-10, fp_max_iter: int = 200) -> FeFunction:
    """Solve the ASGS or OSGS problem; returns u_h over the free dofs."""
    if kind.kind is Kind.GALERKIN:
        return solve_galerkin(mesh, dofs, params, solver, disc, info)
    disc = disc or Discretization(mesh, dofs, params, assemble_operators(mesh, dofs, params))
    info = info if info is not None else SolveInfo()
    if kind.kind is Kind.ASGS:
        res = solve(asgs_matrix(disc, stab, kind.edge_term_enabled), _stabilized_rhs(disc, stab, kind), solver)
        info.iterations, info.residual = res.iterations, res.residual
        return FeFunction.from_free(mesh, dofs, res.x)

    system = osgs_system(disc, stab, kind)
    n = dofs.n_free
    if kind.osgs_solver == "block":
        K, rhs = system.block()
        res = solve(K, rhs, solver)
        info.iterations, info.residual = res.iterations, res.residual
        return FeFunction.from_free(mesh, dofs, res.x[:n])

    # fixed point lagging the projection
    u = np.zeros(n)
    xi = np.zeros(system.ws.n)
    for it in range(1, fp_max_iter + 1):
        res = solve(system.A, system.rhs + stab.tau_K * (system.B_adj @ xi), solver)
        info.iterations += res.iterations
        u_new = res.x
        xi = system.ws.solve_mass(system.B_L @ u_new)
        delta = np.linalg.norm(u_new - u)
        scale = np.linalg.norm(u_new)
        u = u_new
        if delta <= fp_tol * max(scale, np.finfo(float).tiny):
            info.fixed_point_iterations = it
            info.residual = res.residual
            return FeFunction.from_free(mesh, dofs, u)
    raise NonConvergence(
        f"OSGS fixed-point iteration did not converge in {fp_max_iter} iterations",
        x=u, iterations=fp_max_iter, residual=delta / max(scale, np.finfo(float).tiny),
    )


def solve_formulation(disc: Discretization, stab: StabParams, kind: FormulationKind,
                      solver: SolverConfig = DEFAULT_SOLVER, info: SolveInfo | None = None) -> FeFunction:
    return solve_stabilized(disc.mesh, disc.dofs, disc.params, stab, kind, solver, disc, info)


__all__ = [
    "StabConstants", "StabParams", "compute_tau", "Kind", "FormulationKind", "FeFunction",
    "Discretization", "SolveInfo", "solve_galerkin", "solve_stabilized", "solve_formulation",
    "asgs_matrix", "osgs_system", "DEFAULT_SOLVER", "Preconditioner",
]
