"""Sub-grid-scale a posteriori error estimator, exact-error norms, effectivity.

The estimator is the scaled norm of the modelled sub-grid scales,

    eta^2 = sum_K tau_K ||P(R_K)||_K^2 + sum_E tau_E ||R_E||_E^2

with ``R_K = f - L u_h`` the element residual, ``R_E = k [d_n u_h]`` the
flux jump and ``P`` the orthogonal complement of the L2 projection (OSGS)
or the identity (ASGS).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .assembly import (
    DATA_ORDER, PhysicalParams, edge_jump_norms, fe_gradients, fe_laplacians, fe_values, forcing_at,
)
from .fields import ElementField, FeFunction
from .mesh import Mesh, is_nested
from .projection import ProjectionSpace, ProjectionWorkspace, element_norms, orthogonal_component_element_norms
from .quadrature import composite_rule, element_tables, physical_points, q1_grad, q1_shape

EDGE_ORDER = 3
# residual integrals: 5 points per direction integrate ||P^perp R||^2 exactly
# for the degree-(4, 3) manufactured forcing
RESIDUAL_ORDER = 5


class DegenerateNormalization(ValueError):
    pass


class EstimatorMode(str, enum.Enum):
    OSGS = "osgs"
    ASGS = "asgs"
    VERFURTH0 = "verfurth0"


@dataclass(frozen=True)
class EstimatorReport:
    mode: EstimatorMode
    interior: np.ndarray  # per element
    edge: np.ndarray  # per interior edge
    element_total: np.ndarray  # eta_K^2: interior + half of each adjacent edge
    eta: float

    @property
    def eta_squared(self) -> float:
        return float(self.interior.sum() + self.edge.sum())

    @property
    def eta_K(self) -> np.ndarray:
        return np.sqrt(self.element_total)


def residual_field(mesh: Mesh, params: PhysicalParams, u_h: FeFunction, order: int = DATA_ORDER) -> ElementField:
    """``R_K = f - (-k lap u_h + a.grad u_h + s u_h)`` element by element."""
    nodal = u_h.nodal_values()
    a = np.asarray(params.a)

    def evaluate(t):
        Lu = (-params.k * fe_laplacians(mesh, nodal, t)
              + fe_gradients(mesh, nodal, t) @ a
              + params.s * fe_values(mesh, nodal, t))
        return forcing_at(mesh, params.f, t) - Lu

    return ElementField(evaluate, order)


def split_edges(mesh: Mesh, edge: np.ndarray) -> np.ndarray:
    """Per-element share of edge contributions, half to each neighbour."""
    out = np.zeros(mesh.n_elements)
    np.add.at(out, mesh.edge_elems[:, 0], 0.5 * edge)
    np.add.at(out, mesh.edge_elems[:, 1], 0.5 * edge)
    return out


def estimate(ws: ProjectionWorkspace, params: PhysicalParams, stab, u_h: FeFunction,
             mode=EstimatorMode.OSGS) -> EstimatorReport:
    mode = EstimatorMode(mode)
    mesh = ws.mesh
    R = residual_field(mesh, params, u_h, RESIDUAL_ORDER)
    if mode is EstimatorMode.ASGS:
        interior = stab.tau_K * element_norms(mesh, R)
    else:
        tau = stab.tau_K0 if mode is EstimatorMode.VERFURTH0 else stab.tau_K
        interior = tau * orthogonal_component_element_norms(ws, R)
    jumps = edge_jump_norms(mesh, u_h.nodal_values(), params.k, EDGE_ORDER)
    if mode is EstimatorMode.VERFURTH0:
        # eta_{K,0} sums over the edges of K, so each interior edge enters twice
        edge = 2.0 * stab.tau_E0 * jumps
    else:
        edge = stab.tau_E * jumps
    total = interior + split_edges(mesh, edge)
    eta = float(np.sqrt(interior.sum() + edge.sum()))
    return EstimatorReport(mode, interior, edge, total, eta)


# exact errors ----------------------------------------------------------------


@dataclass(frozen=True)
class ErrorReport:
    rel_L2: float
    rel_stab: float
    abs_L2: float
    abs_stab: float
    # absolute squared components k||grad e||^2, s||e||^2, tau_K||a.grad e||^2
    components: tuple[float, float, float]
    denominators: tuple[float, float, float]
    element_stab: np.ndarray | None = None  # |||e|||_K^2 per element


def _norms(err_val, err_grad, ref_val, ref_grad, params: PhysicalParams, tau_K: float,
           weights: np.ndarray) -> ErrorReport:
    a = np.asarray(params.a)
    e_sums = np.stack([(err_val**2) @ weights, np.sum(err_grad**2, axis=-1) @ weights,
                       ((err_grad @ a) ** 2) @ weights])
    u_sums = [float(((ref_val**2) @ weights).sum()), float((np.sum(ref_grad**2, axis=-1) @ weights).sum()),
              float((((ref_grad @ a) ** 2) @ weights).sum())]
    return _report(e_sums, u_sums, params, tau_K)


def error_norms(mesh: Mesh, u_h: FeFunction, exact_value: Callable, exact_grad: Callable,
                params: PhysicalParams, stab, order: int = DATA_ORDER, subdivisions=None) -> ErrorReport:
    """Relative and absolute L2 and stabilized-norm errors against an analytic solution.

    ``subdivisions`` optionally gives, per element, the number ``(mx, my)``
    of sub-rectangles on which the Gauss rule is repeated; use it where the
    exact solution has features much thinner than ``h``.
    """
    nodal = u_h.nodal_values()
    if subdivisions is None:
        subdivisions = np.ones((mesh.n_elements, 2), dtype=np.int64)
    subdivisions = np.asarray(subdivisions, dtype=np.int64).reshape(mesh.n_elements, 2)
    n_el = mesh.n_elements
    e_sums = np.zeros((3, n_el))
    u_sums = np.zeros(3)
    a = np.asarray(params.a)
    for mx, my in np.unique(subdivisions, axis=0):
        idx = np.flatnonzero((subdivisions[:, 0] == mx) & (subdivisions[:, 1] == my))
        t = element_tables(order, mesh.h, composite_rule(order, int(mx), int(my)))
        xq = physical_points(mesh.origins[idx], t.rule, mesh.h)
        x, y = xq[..., 0], xq[..., 1]
        u = np.asarray(exact_value(x, y), dtype=float) * np.ones(x.shape)
        gu = np.moveaxis(np.asarray(exact_grad(x, y), dtype=float), 0, -1) * np.ones(x.shape + (2,))
        loc = nodal[mesh.elements[idx]]
        ev = u - loc @ t.N.T
        eg = gu - np.einsum("ei,qid->eqd", loc, t.dN)
        w = t.weights
        e_sums[0, idx] = (ev**2) @ w
        e_sums[1, idx] = np.sum(eg**2, axis=-1) @ w
        e_sums[2, idx] = (eg @ a) ** 2 @ w
        u_sums += [float(((u**2) @ w).sum()), float((np.sum(gu**2, axis=-1) @ w).sum()),
                   float((((gu @ a) ** 2) @ w).sum())]
    return _report(e_sums, u_sums, params, stab.tau_K)


def _report(e_sums: np.ndarray, u_sums, params: PhysicalParams, tau_K: float) -> ErrorReport:
    """Assemble an ErrorReport from per-element (L2, H1, advective) squared error sums."""
    e_L2, e_H1, e_adv = e_sums
    u_L2, u_H1, u_adv = u_sums
    comps = (params.k * float(e_H1.sum()), params.s * float(e_L2.sum()), tau_K * float(e_adv.sum()))
    dens = (params.k * u_H1, params.s * u_L2, tau_K * u_adv)
    if u_L2 <= 0 or sum(dens) <= 0:
        raise DegenerateNormalization("reference solution has zero norm")
    return ErrorReport(
        rel_L2=float(np.sqrt(e_L2.sum() / u_L2)),
        rel_stab=float(np.sqrt(sum(comps) / sum(dens))),
        abs_L2=float(np.sqrt(e_L2.sum())),
        abs_stab=float(np.sqrt(sum(comps))),
        components=comps,
        denominators=dens,
        element_stab=params.k * e_H1 + params.s * e_L2 + tau_K * e_adv,
    )


def effectivity(est: EstimatorReport | float, abs_stab_error: float) -> float:
    """Estimated over exact (absolute, unnormalized) stabilized-norm error."""
    eta = est.eta if isinstance(est, EstimatorReport) else float(est)
    if not abs_stab_error > 0:
        raise DegenerateNormalization("exact error is zero; effectivity undefined")
    return eta / abs_stab_error


def prolongate(coarse_u: FeFunction, fine: Mesh) -> FeFunction:
    """Interpolate a coarse Q1 function at the nodes of a nested fine mesh."""
    if not is_nested(coarse_u.mesh, fine):
        raise ValueError("meshes are not nested")
    dofs = fine.dof_map()
    pts = fine.nodes[dofs.free_nodes]
    return FeFunction.from_free(fine, dofs, coarse_u(pts[:, 0], pts[:, 1]))


def reference_error(coarse_u: FeFunction, fine_u: FeFunction, params: PhysicalParams | None = None,
                    stab=None, with_stab: bool = False) -> ErrorReport:
    """Error of ``coarse_u`` measured against ``fine_u`` on a nested refinement.

    Integration runs over the fine mesh, where both functions are bilinear on
    every element, so the 2x2 rule is exact. Only the L2 error is computed
    unless ``with_stab`` is set; the stabilized entries are then NaN.
    """
    coarse, fine = coarse_u.mesh, fine_u.mesh
    if not is_nested(coarse, fine):
        raise ValueError("meshes are not nested")
    t = element_tables(2, fine.h)
    xq = physical_points(fine.origins, t.rule, fine.h).reshape(-1, 2)
    elem, ref = coarse.locate(xq)
    cn = coarse_u.nodal_values()[coarse.elements[elem]]
    cv = np.sum(cn * q1_shape(ref[:, 0], ref[:, 1]), axis=1).reshape(fine.n_elements, -1)
    cg = np.einsum("pi,pid->pd", cn, q1_grad(ref[:, 0], ref[:, 1], coarse.h)).reshape(fine.n_elements, -1, 2)
    fn = fine_u.nodal_values()
    fv = fe_values(fine, fn, t)
    fg = fe_gradients(fine, fn, t)
    if with_stab:
        if params is None or stab is None:
            raise ValueError("stabilized error needs params and stab")
        return _norms(fv - cv, fg - cg, fv, fg, params, stab.tau_K, t.weights)
    e2 = float(((fv - cv) ** 2 @ t.weights).sum())
    u2 = float((fv**2 @ t.weights).sum())
    if u2 <= 0:
        raise DegenerateNormalization("reference solution has zero norm")
    nan = float("nan")
    return ErrorReport(np.sqrt(e2 / u2), nan, np.sqrt(e2), nan, (nan, nan, nan), (nan, nan, nan))
