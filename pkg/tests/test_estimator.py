import dataclasses
import math

import numpy as np
import pytest

from oracles import dense_estimator, dense_matrices, free_nodes
from vmsest.assembly import PhysicalParams, zero_forcing
from vmsest.cases import case_boundary_layer, case_convection_dominated, case_diffusion_dominated, case_lshape
from vmsest.estimator import (
    DegenerateNormalization, EstimatorMode, effectivity, error_norms, estimate, prolongate, reference_error,
)
from vmsest.fields import FeFunction
from vmsest.formulations import Discretization, FormulationKind, compute_tau, solve_formulation
from vmsest.linalg import Method, SolverConfig
from vmsest.mesh import build_lshape_mesh, build_unit_square_mesh
from vmsest.quadrature import q1_grad

DENSE = SolverConfig(Method.DENSE_LU)


def solved(case, mesh, kind="osgs"):
    disc = Discretization.build(mesh, case.params)
    st = compute_tau(case.params, mesh.h)
    u = solve_formulation(disc, st, FormulationKind(kind), DENSE if mesh.n_nodes < 2000 else SolverConfig())
    return disc, st, u


def est(disc, st, u, mode, params=None):
    return estimate(disc.workspace("constrained"), params or disc.params, st, u, mode)


@pytest.mark.parametrize("mode", list(EstimatorMode))
def test_zero_forcing_zero_solution(mode):
    mesh = build_unit_square_mesh(5)
    p = case_convection_dominated().params.with_forcing(zero_forcing)
    disc = Discretization.build(mesh, p)
    st = compute_tau(p, mesh.h)
    u = FeFunction.from_free(mesh, disc.dofs, np.zeros(disc.dofs.n_free))
    r = est(disc, st, u, mode)
    assert r.eta == 0.0
    assert np.all(r.element_total == 0.0)


def test_tiny_diffusion_kills_edge_contributions():
    mesh = build_unit_square_mesh(6)
    p = PhysicalParams(1e-12, (1.0, 0.5), 1.0, lambda x, y: np.sin(3 * x) * y)
    disc = Discretization.build(mesh, p)
    st = compute_tau(p, mesh.h)
    u = FeFunction.from_free(mesh, disc.dofs, np.random.default_rng(0).normal(size=disc.dofs.n_free))
    r = est(disc, st, u, "osgs")
    assert r.edge.sum() < 1e-20 * r.interior.sum()


@pytest.mark.parametrize("mode", ["osgs", "asgs", "verfurth0"])
@pytest.mark.parametrize("n", [4, 5])
def test_estimator_matches_dense_oracle(mode, n):
    case = case_convection_dominated()
    mesh = build_unit_square_mesh(n)
    disc, st, u = solved(case, mesh, "asgs" if mode == "asgs" else "osgs")
    ours = est(disc, st, u, mode).eta_squared
    if mode == "verfurth0":
        # each interior edge belongs to two element indicators
        ref = dense_estimator(mesh, case.params, u.nodal_values(), st.tau_K0, 2 * st.tau_E0, free_nodes(mesh))
    else:
        ref = dense_estimator(mesh, case.params, u.nodal_values(), st.tau_K, st.tau_E, free_nodes(mesh), mode)
    assert ours == pytest.approx(ref, rel=1e-8)


def test_report_invariants():
    case = case_boundary_layer()
    mesh = build_unit_square_mesh(12)
    disc, st, u = solved(case, mesh)
    for mode in EstimatorMode:
        r = est(disc, st, u, mode)
        assert np.all(r.interior >= 0) and np.all(r.edge >= 0)
        assert r.eta**2 == pytest.approx(r.interior.sum() + r.edge.sum(), rel=1e-13)
        assert r.element_total.sum() == pytest.approx(r.eta**2, rel=1e-13)
        assert r.eta_K.shape == (mesh.n_elements,)


def test_osgs_interior_below_asgs_interior():
    for case in (case_convection_dominated(), case_diffusion_dominated(), case_boundary_layer()):
        mesh = build_unit_square_mesh(10)
        disc, st, u = solved(case, mesh)
        o, a = est(disc, st, u, "osgs"), est(disc, st, u, "asgs")
        assert o.interior.sum() <= a.interior.sum() + 1e-12
        np.testing.assert_array_equal(o.edge, a.edge)


def permuted_mesh(mesh, seed=0):
    rng = np.random.default_rng(seed)
    p = rng.permutation(mesh.n_elements)
    ip = np.empty_like(p)
    ip[p] = np.arange(len(p))
    q = rng.permutation(mesh.n_edges)
    cell_map = mesh.cell_map.copy()
    cell_map[cell_map >= 0] = ip[cell_map[cell_map >= 0]]
    return dataclasses.replace(
        mesh, elements=mesh.elements[p], edge_nodes=mesh.edge_nodes[q], edge_elems=ip[mesh.edge_elems[q]],
        edge_normals=mesh.edge_normals[q], edge_lengths=mesh.edge_lengths[q], cell_map=cell_map,
    )


def test_eta_invariant_under_relabeling():
    case = case_lshape()
    mesh = build_lshape_mesh(1)
    other = permuted_mesh(mesh)
    d1, s1, u1 = solved(case, mesh)
    d2, s2, u2 = solved(case, other)
    for mode in EstimatorMode:
        assert est(d1, s1, u1, mode).eta == pytest.approx(est(d2, s2, u2, mode).eta, rel=1e-10)


def test_scaling_consistency():
    base = case_convection_dominated()
    mesh = build_unit_square_mesh(12)
    c = 7.5
    out = []
    for case in (base, base.scaled(c)):
        disc, st, u = solved(case, mesh)
        e = est(disc, st, u, "osgs")
        err = error_norms(mesh, u, case.exact.value, case.exact.grad, case.params, st)
        out.append((e.eta, err.abs_stab, effectivity(e, err.abs_stab)))
    assert out[1][0] == pytest.approx(c * out[0][0], rel=1e-8)
    assert out[1][1] == pytest.approx(c * out[0][1], rel=1e-8)
    assert out[1][2] == pytest.approx(out[0][2], rel=1e-8)


def bilinear_exact(u):
    mesh = u.mesh
    nodal = u.nodal_values()

    def grad(x, y):
        pts = np.column_stack([np.ravel(x), np.ravel(y)])
        elem, ref = mesh.locate(pts)
        g = np.einsum("pi,pid->pd", nodal[mesh.elements[elem]], q1_grad(ref[:, 0], ref[:, 1], mesh.h))
        return np.moveaxis(g.reshape(np.shape(x) + (2,)), -1, 0)

    return u, grad


def test_error_of_exact_fe_function_is_zero():
    mesh = build_unit_square_mesh(4)
    dofs = mesh.dof_map()
    u = FeFunction.from_free(mesh, dofs, np.random.default_rng(2).normal(size=dofs.n_free))
    value, grad = bilinear_exact(u)
    p = case_convection_dominated().params
    r = error_norms(mesh, u, value, grad, p, compute_tau(p, mesh.h))
    assert r.rel_L2 < 1e-14 and r.rel_stab < 1e-13
    assert r.abs_L2 < 1e-14


def test_zero_reference_is_degenerate():
    mesh = build_unit_square_mesh(3)
    dofs = mesh.dof_map()
    u = FeFunction.from_free(mesh, dofs, np.zeros(dofs.n_free))
    p = case_convection_dominated().params
    zero = lambda x, y: np.zeros_like(x)
    with pytest.raises(DegenerateNormalization):
        error_norms(mesh, u, zero, lambda x, y: np.stack([zero(x, y), zero(x, y)]), p, compute_tau(p, mesh.h))


def test_error_report_components():
    case = case_convection_dominated()
    mesh = build_unit_square_mesh(8)
    disc, st, u = solved(case, mesh)
    r = error_norms(mesh, u, case.exact.value, case.exact.grad, case.params, st)
    assert all(c >= 0 for c in r.components)
    assert r.rel_stab**2 == pytest.approx(sum(r.components) / sum(r.denominators), rel=1e-13)
    assert r.abs_stab**2 == pytest.approx(sum(r.components), rel=1e-13)
    assert r.element_stab.sum() == pytest.approx(sum(r.components), rel=1e-12)


def test_convection_rates_between_fine_meshes():
    case = case_convection_dominated()
    reps = []
    for n in (32, 64):
        mesh = build_unit_square_mesh(n)
        disc, st, u = solved(case, mesh)
        reps.append(error_norms(mesh, u, case.exact.value, case.exact.grad, case.params, st))
    rate = lambda a, b: math.log(a / b) / math.log(2)
    assert rate(reps[0].rel_L2, reps[1].rel_L2) == pytest.approx(2.0, abs=0.1)
    # the absolute stabilized error converges like h^{3/2}; the normalized one
    # loses half an order because its denominator carries tau_K ~ h
    assert rate(reps[0].abs_stab, reps[1].abs_stab) == pytest.approx(1.5, abs=0.1)
    assert rate(reps[0].rel_stab, reps[1].rel_stab) == pytest.approx(1.0, abs=0.1)


def test_effectivity():
    assert effectivity(0.123, 0.123) == 1.0
    with pytest.raises(DegenerateNormalization):
        effectivity(1.0, 0.0)


def test_reference_error_of_prolongation_is_zero():
    case = case_lshape()
    coarse = build_lshape_mesh(0)
    _, _, u = solved(case, coarse)
    fine = prolongate(u, build_lshape_mesh(2))
    assert reference_error(u, fine).abs_L2 < 1e-14


def test_reference_error_identical_meshes():
    mesh = build_lshape_mesh(0)
    dofs = mesh.dof_map()
    rng = np.random.default_rng(4)
    a = FeFunction.from_free(mesh, dofs, rng.normal(size=dofs.n_free))
    b = FeFunction.from_free(mesh, dofs, rng.normal(size=dofs.n_free))
    d = a.nodal_values() - b.nodal_values()
    M = dense_matrices(mesh, 1.0, (0.0, 0.0), 0.0)["M"]
    assert reference_error(a, b).abs_L2 == pytest.approx(math.sqrt(d @ M @ d), rel=1e-12)


def test_reference_error_rejects_non_nested():
    u = FeFunction.from_free(build_lshape_mesh(1), build_lshape_mesh(1).dof_map(), np.ones(161))
    v = FeFunction.from_free(build_lshape_mesh(0), build_lshape_mesh(0).dof_map(), np.ones(33))
    with pytest.raises(ValueError):
        reference_error(u, v)
    sq = build_unit_square_mesh(16)
    with pytest.raises(ValueError):
        reference_error(v, FeFunction.from_free(sq, sq.dof_map(), np.ones(225)))


def test_reference_error_decreases_towards_fine_level():
    case = case_lshape()
    fine = solved(case, build_lshape_mesh(4))[2]
    errs = [reference_error(solved(case, build_lshape_mesh(L))[2], fine).rel_L2 for L in (0, 1, 2)]
    assert errs[0] > errs[1] > errs[2] > 0
