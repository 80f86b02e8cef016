"""Assembly of the Q1 operators of the convection-diffusion-reaction problem.

Every element is a congruent square and the coefficients are constant, so
each local matrix is computed once and scattered to all elements. Matrices
are first assembled over all mesh nodes and then restricted to the free
dofs (Dirichlet elimination).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .linalg import coo_to_csr, to_csr
from .mesh import DofMap, Mesh
from .quadrature import ElementTables, element_tables, gauss_edge_rule, physical_points, q1_grad

Forcing = Callable[[np.ndarray, np.ndarray], np.ndarray]

# FE-only integrands are products of bilinears: 2x2 Gauss is exact on squares
FE_ORDER = 2
# integrands with exact solutions or non-polynomial data
DATA_ORDER = 4


def zero_forcing(x, y):
    return np.zeros(np.broadcast(x, y).shape)


@dataclass(frozen=True)
class PhysicalParams:
    k: float
    a: tuple[float, float]
    s: float
    f: Forcing = zero_forcing

    def __post_init__(self):
        a = tuple(float(v) for v in np.ravel(self.a))
        if len(a) != 2:
            raise ValueError("advection velocity must be a 2-vector")
        object.__setattr__(self, "a", a)
        if not self.k > 0:
            raise ValueError(f"diffusion k must be positive, got {self.k}")
        if self.s < 0:
            raise ValueError(f"reaction s must be nonnegative, got {self.s}")

    @property
    def a_norm(self) -> float:
        return float(np.hypot(*self.a))

    def with_forcing(self, f: Forcing) -> "PhysicalParams":
        return PhysicalParams(self.k, self.a, self.s, f)


# local (per element) basis quantities --------------------------------------


def operator_basis(params: PhysicalParams, t: ElementTables) -> tuple[np.ndarray, np.ndarray]:
    """Values at quadrature points of ``L phi_j`` and ``-L* phi_i``, each (n_q, 4).

    ``L u = -k lap u + a.grad u + s u`` and ``-L* v = k lap v + a.grad v - s v``.
    """
    adv = t.dN @ np.asarray(params.a)
    L = -params.k * t.lapN + adv + params.s * t.N
    Ladj = params.k * t.lapN + adv - params.s * t.N
    return L, Ladj


def local_matrix(t: ElementTables, test: np.ndarray, trial: np.ndarray) -> np.ndarray:
    """``A[i, j] = sum_q w_q test[q, i] trial[q, j]``."""
    return np.einsum("q,qi,qj->ij", t.weights, test, trial)


def scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    """Global node-by-node matrix from one local 4x4 matrix."""
    el = mesh.elements
    rows = np.repeat(el, 4, axis=1)
    cols = np.tile(el, (1, 4))
    vals = np.broadcast_to(local.ravel(), rows.shape)
    n = mesh.n_nodes
    return coo_to_csr(rows, cols, vals, (n, n))


def integrate_against(mesh: Mesh, values: np.ndarray, t: ElementTables, basis=None) -> np.ndarray:
    """Nodal vector ``b_i = sum_K (values, basis_i)_K`` for values of shape (n_elem, n_q)."""
    basis = t.N if basis is None else basis
    local = (values * t.weights) @ basis  # (n_elem, 4)
    return np.bincount(mesh.elements.ravel(), weights=local.ravel(), minlength=mesh.n_nodes)


def fe_values(mesh: Mesh, nodal: np.ndarray, t: ElementTables) -> np.ndarray:
    return nodal[mesh.elements] @ t.N.T


def fe_gradients(mesh: Mesh, nodal: np.ndarray, t: ElementTables) -> np.ndarray:
    return np.einsum("ei,qid->eqd", nodal[mesh.elements], t.dN)


def fe_laplacians(mesh: Mesh, nodal: np.ndarray, t: ElementTables) -> np.ndarray:
    return nodal[mesh.elements] @ t.lapN.T


def forcing_at(mesh: Mesh, f: Forcing, t: ElementTables) -> np.ndarray:
    xq = physical_points(mesh.origins, t.rule, mesh.h)
    return np.asarray(f(xq[..., 0], xq[..., 1]), dtype=float) * np.ones(xq.shape[:2])


# edge jumps ------------------------------------------------------------------


def _edge_jump_basis(mesh: Mesh, order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normal-derivative jump of each local basis function at edge points.

    Returns (dofs (n_edges, 8), g (n_edges, n_q, 8), weights (n_edges, n_q))
    with ``[d_n u](q) = sum_j g[e, q, j] u[dofs[e, j]]``.
    """
    rule = gauss_edge_rule(order)
    h = mesh.h
    pa = mesh.nodes[mesh.edge_nodes[:, 0]]
    pb = mesh.nodes[mesh.edge_nodes[:, 1]]
    s = 0.5 * (rule.points + 1.0)
    pts = pa[:, None, :] + s[None, :, None] * (pb - pa)[:, None, :]  # (E, Q, 2)
    parts = []
    for side, sign in ((0, 1.0), (1, -1.0)):
        elem = mesh.edge_elems[:, side]
        ref = 2.0 * (pts - mesh.origins[elem][:, None, :]) / h - 1.0
        grad = q1_grad(ref[..., 0], ref[..., 1], h)  # (E, Q, 4, 2)
        dn = np.einsum("eqid,ed->eqi", grad, mesh.edge_normals)
        parts.append((mesh.elements[elem], sign * dn))
    dofs = np.concatenate([parts[0][0], parts[1][0]], axis=1)
    g = np.concatenate([parts[0][1], parts[1][1]], axis=2)
    w = np.outer(0.5 * mesh.edge_lengths, rule.weights)
    return dofs, g, w


def assemble_edge_jump(mesh: Mesh, k: float, order: int = 2) -> sp.csr_matrix:
    """Node-by-node matrix of ``sum_E <k [d_n u], k [d_n v]>_E``."""
    n = mesh.n_nodes
    if mesh.n_edges == 0:
        return sp.csr_matrix((n, n))
    dofs, g, w = _edge_jump_basis(mesh, order)
    local = k**2 * np.einsum("eq,eqi,eqj->eij", w, g, g)
    rows = np.repeat(dofs[:, :, None], 8, axis=2)
    cols = np.repeat(dofs[:, None, :], 8, axis=1)
    return coo_to_csr(rows, cols, local, (n, n))


def edge_jump_norms(mesh: Mesh, nodal: np.ndarray, k: float, order: int = 2) -> np.ndarray:
    """Per interior edge ``||k [d_n u_h]||_E^2`` for a nodal vector."""
    if mesh.n_edges == 0:
        return np.zeros(0)
    dofs, g, w = _edge_jump_basis(mesh, order)
    jump = np.einsum("eqi,ei->eq", g, np.asarray(nodal)[dofs])
    return k**2 * np.sum(w * jump**2, axis=1)


# operator sets -----------------------------------------------------------------


@dataclass(frozen=True)
class FullOperators:
    """Node-by-node matrices (no boundary elimination).

    Row index is the test function, column index the trial function.
    ``R_LL`` is ``(-L* phi_i, L phi_j)``, ``B_L`` is ``(L phi_j, phi_p)`` and
    ``B_adj`` is ``(-L* phi_i, phi_p)``.
    """

    K_diff: sp.csr_matrix
    C_conv: sp.csr_matrix
    M_mass: sp.csr_matrix
    D_stream: sp.csr_matrix
    J_edge: sp.csr_matrix
    G_conv_rhs_map: sp.csr_matrix
    R_LL: sp.csr_matrix
    B_L: sp.csr_matrix
    B_adj: sp.csr_matrix


@dataclass(frozen=True)
class OperatorSet:
    """Operators over the free dofs, plus the full-node versions they came from."""

    K_diff: sp.csr_matrix
    C_conv: sp.csr_matrix
    M_mass: sp.csr_matrix
    D_stream: sp.csr_matrix
    J_edge: sp.csr_matrix
    G_conv_rhs_map: sp.csr_matrix
    full: FullOperators

    @property
    def n(self) -> int:
        return self.K_diff.shape[0]


def _symmetric(A: sp.csr_matrix) -> sp.csr_matrix:
    # rounding in the local products and in duplicate summation can differ
    # between (i, j) and (j, i); averaging restores value-level symmetry
    return to_csr(0.5 * (A + A.T))


def assemble_full_operators(mesh: Mesh, params: PhysicalParams) -> FullOperators:
    t = element_tables(FE_ORDER, mesh.h)
    a = np.asarray(params.a)
    adv = t.dN @ a
    L, Ladj = operator_basis(params, t)
    dN = t.dN
    Kloc = params.k * np.einsum("q,qid,qjd->ij", t.weights, dN, dN)
    Mloc = local_matrix(t, t.N, t.N)
    Cloc = local_matrix(t, t.N, adv)
    Dloc = local_matrix(t, adv, adv)
    Gloc = local_matrix(t, adv, t.N)
    return FullOperators(
        K_diff=_symmetric(scatter(mesh, Kloc)),
        C_conv=scatter(mesh, Cloc),
        M_mass=_symmetric(scatter(mesh, Mloc)),
        D_stream=_symmetric(scatter(mesh, Dloc)),
        J_edge=_symmetric(assemble_edge_jump(mesh, params.k)),
        G_conv_rhs_map=scatter(mesh, Gloc),
        R_LL=scatter(mesh, local_matrix(t, Ladj, L)),
        B_L=scatter(mesh, local_matrix(t, t.N, L)),
        B_adj=scatter(mesh, local_matrix(t, Ladj, t.N)),
    )


def restrict(A: sp.spmatrix, rows: np.ndarray, cols: np.ndarray) -> sp.csr_matrix:
    A = sp.csr_matrix(A)[rows][:, cols]
    A = sp.csr_matrix(A)
    A.sort_indices()
    return A


def assemble_operators(mesh: Mesh, dofs: DofMap, params: PhysicalParams) -> OperatorSet:
    full = assemble_full_operators(mesh, params)
    free = dofs.free_nodes
    return OperatorSet(
        K_diff=restrict(full.K_diff, free, free),
        C_conv=restrict(full.C_conv, free, free),
        M_mass=restrict(full.M_mass, free, free),
        D_stream=restrict(full.D_stream, free, free),
        J_edge=restrict(full.J_edge, free, free),
        G_conv_rhs_map=restrict(full.G_conv_rhs_map, free, free),
        full=full,
    )


def assemble_load_full(mesh: Mesh, f: Forcing, quad_order: int = DATA_ORDER, basis: str = "value",
                       params: PhysicalParams | None = None) -> np.ndarray:
    """Nodal load vector pairing ``f`` with a test quantity of every basis function.

    ``basis`` is ``"value"`` for ``(f, phi_i)``, ``"advective"`` for
    ``(f, a.grad phi_i)`` and ``"adjoint"`` for ``(f, -L* phi_i)``.
    """
    t = element_tables(quad_order, mesh.h)
    fq = forcing_at(mesh, f, t)
    if basis == "value":
        test = t.N
    elif basis == "advective":
        test = t.dN @ np.asarray(params.a)
    elif basis == "adjoint":
        test = operator_basis(params, t)[1]
    else:
        raise ValueError(f"unknown test quantity {basis!r}")
    return integrate_against(mesh, fq, t, test)


def assemble_load(mesh: Mesh, dofs: DofMap, f: Forcing, quad_order: int = DATA_ORDER) -> np.ndarray:
    """``b_i = int f phi_i`` over the free dofs."""
    return assemble_load_full(mesh, f, quad_order)[dofs.free_nodes]
