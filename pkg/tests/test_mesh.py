import itertools

import numpy as np
import pytest

from vmsest.mesh import (
    BOUNDARY, DomainKind, boundary_nodes, build_lshape_mesh, build_unit_square_mesh, is_nested,
)


def enumerate_interior_edges(mesh):
    """Brute force: node pairs that are a side of exactly two elements."""
    count = {}
    for el in mesh.elements:
        for i in range(4):
            key = frozenset((int(el[i]), int(el[(i + 1) % 4])))
            count[key] = count.get(key, 0) + 1
    return {k for k, c in count.items() if c == 2}


@pytest.mark.parametrize("n, nodes, elems, edges", [(1, 4, 1, 0), (2, 9, 4, 4), (20, 441, 400, 760)])
def test_unit_square_counts(n, nodes, elems, edges):
    mesh = build_unit_square_mesh(n)
    assert mesh.n_nodes == nodes
    assert mesh.n_elements == elems
    assert mesh.n_edges == edges == 2 * n * (n - 1)
    assert len(enumerate_interior_edges(mesh)) == edges
    assert mesh.h == pytest.approx(1.0 / n)


@pytest.mark.parametrize("bad", [0, -1, 2.5, True, "3"])
def test_unit_square_rejects_bad_n(bad):
    with pytest.raises(ValueError):
        build_unit_square_mesh(bad)


@pytest.mark.parametrize("level, elems", [(0, 48), (1, 192), (2, 768), (3, 3072)])
def test_lshape_element_counts(level, elems):
    mesh = build_lshape_mesh(level)
    assert mesh.n_elements == elems
    assert mesh.domain_kind is DomainKind.LSHAPE


def test_lshape_level0_nodes_and_boundary():
    mesh = build_lshape_mesh(0)
    assert mesh.n_nodes == 65
    assert len(boundary_nodes(mesh)) == 32
    # no node strictly inside the removed block
    x, y = mesh.nodes.T
    assert not np.any((x > 0.5) & (y < 0.5))


def test_lshape_rejects_negative_level():
    with pytest.raises(ValueError):
        build_lshape_mesh(-1)


def test_boundary_nodes_unit_square():
    assert boundary_nodes(build_unit_square_mesh(1)) == {0, 1, 2, 3}
    mesh = build_unit_square_mesh(2)
    b = boundary_nodes(mesh)
    assert len(b) == 8
    center = int(np.flatnonzero(np.all(np.isclose(mesh.nodes, 0.5), axis=1))[0])
    assert center not in b


def on_lshape_boundary(x, y, tol=1e-12):
    outer = np.isclose(x, 0, atol=tol) | np.isclose(x, 1, atol=tol) | np.isclose(y, 0, atol=tol) | np.isclose(y, 1, atol=tol)
    reentrant = (np.isclose(x, 0.5, atol=tol) & (y <= 0.5 + tol)) | (np.isclose(y, 0.5, atol=tol) & (x >= 0.5 - tol))
    return outer | reentrant


@pytest.mark.parametrize("level", [0, 1, 2])
def test_lshape_boundary_is_geometric_boundary(level):
    mesh = build_lshape_mesh(level)
    x, y = mesh.nodes.T
    expected = set(np.flatnonzero(on_lshape_boundary(x, y)).tolist())
    assert boundary_nodes(mesh) == expected


@pytest.mark.parametrize("mesh", [build_unit_square_mesh(5), build_lshape_mesh(1)])
def test_element_orientation_and_shape(mesh):
    p = mesh.nodes[mesh.elements]  # (E, 4, 2)
    x, y = p[..., 0], p[..., 1]
    signed = 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)
    assert np.all(signed > 0)
    np.testing.assert_allclose(signed, mesh.h**2, rtol=1e-12)
    # counterclockwise from the lower-left corner
    np.testing.assert_allclose(p[:, 2] - p[:, 0], mesh.h, rtol=1e-12)
    assert all(len(set(el)) == 4 for el in mesh.elements.tolist())


@pytest.mark.parametrize("mesh", [build_unit_square_mesh(4), build_lshape_mesh(0)])
def test_edge_invariants(mesh):
    brute = enumerate_interior_edges(mesh)
    assert {frozenset(map(int, e)) for e in mesh.edge_nodes} == brute
    c = mesh.centroids
    for e in mesh.interior_edges:
        a, b = mesh.nodes[e.node_a], mesh.nodes[e.node_b]
        assert e.length == pytest.approx(np.linalg.norm(b - a))
        n = np.array(e.unit_normal)
        assert np.linalg.norm(n) == pytest.approx(1.0)
        assert abs(n @ (b - a)) < 1e-14
        assert n @ (c[e.elem_right] - c[e.elem_left]) > 0
        assert e.elem_left < e.elem_right
        # both adjacent elements contain the edge nodes
        for el in (e.elem_left, e.elem_right):
            assert {e.node_a, e.node_b} <= set(mesh.elements[el].tolist())


def test_no_hanging_nodes():
    mesh = build_lshape_mesh(1)
    used = set(mesh.elements.ravel().tolist())
    assert used == set(range(mesh.n_nodes))
    # each node lying on an element side is one of its corners ("conforming")
    h = mesh.h
    for el in mesh.elements[:20]:
        lo = mesh.nodes[el[0]]
        inside = np.all((mesh.nodes >= lo - 1e-12) & (mesh.nodes <= lo + h + 1e-12), axis=1)
        assert set(np.flatnonzero(inside).tolist()) == set(el.tolist())


def test_areas():
    assert build_unit_square_mesh(7).area == pytest.approx(1.0, abs=1e-14)
    assert build_lshape_mesh(2).area == pytest.approx(0.75, abs=1e-14)


def test_node_ordering_lexicographic_y_then_x():
    mesh = build_unit_square_mesh(3)
    keys = [(y, x) for x, y in mesh.nodes]
    assert keys == sorted(keys)


@pytest.mark.parametrize("level", [0, 1])
def test_refinement_nested(level):
    coarse, fine = build_lshape_mesh(level), build_lshape_mesh(level + 1)
    assert fine.n_elements == 4 * coarse.n_elements
    assert is_nested(coarse, fine)
    fine_set = {tuple(np.round(p, 12)) for p in fine.nodes}
    assert {tuple(np.round(p, 12)) for p in coarse.nodes} <= fine_set
    assert not is_nested(fine, coarse)
    assert not is_nested(build_unit_square_mesh(8), build_lshape_mesh(0))


def test_dof_map_contiguous():
    mesh = build_lshape_mesh(0)
    dofs = mesh.dof_map()
    free = dofs.node_to_dof[dofs.node_to_dof != BOUNDARY]
    np.testing.assert_array_equal(free, np.arange(dofs.n_free))
    assert set(np.flatnonzero(dofs.node_to_dof == BOUNDARY).tolist()) == mesh.boundary_nodes()
    assert dofs.n_free == 65 - 32


def test_locate_roundtrip_and_outside():
    mesh = build_lshape_mesh(1)
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1, (200, 2))
    pts = pts[~((pts[:, 0] > 0.5) & (pts[:, 1] < 0.5))]
    elem, ref = mesh.locate(pts)
    back = mesh.origins[elem] + 0.5 * mesh.h * (ref + 1.0)
    np.testing.assert_allclose(back, pts, atol=1e-14)
    assert np.all(np.abs(ref) <= 1.0 + 1e-12)
    for bad in ([0.75, 0.25], [1.5, 0.5], [-0.1, 0.2]):
        with pytest.raises(ValueError):
            mesh.locate([bad])
    # the re-entrant boundary itself is part of the closed domain
    mesh.locate([[0.75, 0.5], [0.5, 0.25]])


def test_mesh_arrays_deterministic():
    a, b = build_lshape_mesh(1), build_lshape_mesh(1)
    for name in ("nodes", "elements", "edge_nodes", "edge_elems", "edge_normals"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_every_interior_edge_has_two_elements():
    mesh = build_unit_square_mesh(3)
    counts = np.bincount(mesh.edge_elems.ravel(), minlength=mesh.n_elements)
    # corners have 2 neighbours, sides 3, interior 4
    assert sorted(set(counts.tolist())) == [2, 3, 4]
    assert list(itertools.chain(*mesh.edge_elems.tolist()))
