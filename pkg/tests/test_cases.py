import math

import numpy as np
import pytest

from vmsest.cases import (
    CASES, boundary_layer_solution, case_boundary_layer, case_convection_dominated, case_diffusion_dominated,
    case_lshape, get_case,
)
from vmsest.mesh import DomainKind, build_unit_square_mesh


def fd_operator(case, x, y, d, d2=None):
    """Centered differences of -k lap u + a.grad u + s u."""
    u = case.exact.value
    d2 = d2 or d
    ux = (u(x + d, y) - u(x - d, y)) / (2 * d)
    uy = (u(x, y + d) - u(x, y - d)) / (2 * d)
    lap = (u(x + d2, y) + u(x - d2, y) + u(x, y + d2) + u(x, y - d2) - 4 * u(x, y)) / d2**2
    p = case.params
    return -p.k * lap + p.a[0] * ux + p.a[1] * uy + p.s * u(x, y)


def test_case_registry():
    assert sorted(CASES) == ["convection", "diffusion", "layer", "lshape"]
    assert get_case("layer").name == "layer"
    with pytest.raises(ValueError):
        get_case("nope")


def test_parameters():
    c = case_convection_dominated().params
    assert (c.k, tuple(c.a), c.s) == (1e-5, (0.4, 0.7), 1e-5)
    d = case_diffusion_dominated().params
    assert d.k == 1.0 and d.s == 1e-5
    np.testing.assert_allclose(d.a, (0.4e-5, 0.7e-5))
    b = case_boundary_layer().params
    assert (b.k, tuple(b.a), b.s) == (1e-3, (1.0, 1.0), 1.0)
    lsh = case_lshape()
    assert (lsh.params.k, tuple(lsh.params.a), lsh.params.s) == (1e-6, (1.0, 3.0), 1.0)
    assert lsh.exact is None and lsh.domain_kind is DomainKind.LSHAPE


@pytest.mark.parametrize("case_fn", [case_convection_dominated, case_diffusion_dominated, case_boundary_layer])
def test_exact_vanishes_on_boundary(case_fn):
    u = case_fn().exact.value
    t = np.linspace(0, 1, 101)
    for x, y in ((t, 0 * t), (t, 0 * t + 1), (0 * t, t), (0 * t + 1, t)):
        np.testing.assert_allclose(u(x, y), 0.0, atol=1e-12)
    for n in (8, 32, 128):
        mesh = build_unit_square_mesh(n)
        b = sorted(mesh.boundary_nodes())
        np.testing.assert_allclose(u(mesh.nodes[b, 0], mesh.nodes[b, 1]), 0.0, atol=1e-12)


def test_polynomial_solution_values():
    u = case_convection_dominated().exact.value
    assert u(0.5, 0.25) == pytest.approx(100 * 0.25 * 0.25 * 0.25 * 0.5 * 0.75, rel=1e-15)
    assert u(0.5, 0.25) == pytest.approx(0.5859375, rel=1e-15)
    np.testing.assert_array_equal(case_diffusion_dominated().exact.value(0.3, 0.8), u(0.3, 0.8))


@pytest.mark.parametrize("case_fn", [case_convection_dominated, case_diffusion_dominated])
def test_polynomial_forcing_by_finite_differences(case_fn):
    case = case_fn()
    rng = np.random.default_rng(0)
    x, y = rng.uniform(0.05, 0.95, (2, 100))
    d = 1e-5
    # the 5-point Laplacian needs a larger step to keep cancellation error
    # below 1e-6 when diffusion dominates
    fd = fd_operator(case, x, y, d, d2=1e-3 if case.params.k == 1.0 else d)
    np.testing.assert_allclose(case.f(x, y), fd, rtol=1e-6, atol=1e-6 * np.abs(fd).max())


def test_diffusion_forcing_close_to_minus_laplacian():
    case = case_diffusion_dominated()
    rng = np.random.default_rng(1)
    x, y = rng.uniform(0, 1, (2, 50))
    e = case.exact
    g = e.grad(x, y)
    bound = np.hypot(*case.params.a) * np.hypot(g[0], g[1]) + case.params.s * np.abs(e.value(x, y))
    assert np.all(np.abs(case.f(x, y) + e.laplacian(x, y)) <= bound + 1e-12)


@pytest.mark.parametrize("case_fn", [case_convection_dominated, case_boundary_layer])
def test_gradient_and_laplacian_by_finite_differences(case_fn):
    e = case_fn().exact
    rng = np.random.default_rng(2)
    x, y = rng.uniform(0.05, 0.9, (2, 50))
    d = 1e-6
    gx = (e.value(x + d, y) - e.value(x - d, y)) / (2 * d)
    gy = (e.value(x, y + d) - e.value(x, y - d)) / (2 * d)
    np.testing.assert_allclose(e.grad(x, y), np.stack([gx, gy]), rtol=1e-6, atol=1e-8)
    lap = ((e.grad(x + d, y)[0] - e.grad(x - d, y)[0]) + (e.grad(x, y + d)[1] - e.grad(x, y - d)[1])) / (2 * d)
    np.testing.assert_allclose(e.laplacian(x, y), lap, rtol=1e-6, atol=1e-6)


def test_boundary_layer_values():
    u = case_boundary_layer().exact.value
    assert u(0.5, 0.5) == pytest.approx(0.125, rel=1e-12)
    assert math.exp(-0.5 / 1e-3) < 1e-200
    # exponent stays <= 0, so nothing overflows even at tiny k
    with np.errstate(over="raise"):
        v = boundary_layer_solution(1e-8).value(np.linspace(0, 1, 11), 0.5)
    assert np.all(np.isfinite(v))


def test_boundary_layer_forcing_by_finite_differences():
    case = case_boundary_layer()
    rng = np.random.default_rng(3)
    x, y = rng.uniform(0.05, 0.9, (2, 50))
    np.testing.assert_allclose(case.f(x, y), fd_operator(case, x, y, 1e-5, 1e-4), rtol=1e-6)
    x = rng.uniform(0.99, 0.999, 50)
    y = rng.uniform(0.1, 0.9, 50)
    # f is ~1e-2 there while each term is ~1e3; a 1e-8 second difference
    # would lose all digits to cancellation, so the Laplacian uses 1e-6
    np.testing.assert_allclose(case.f(x, y), fd_operator(case, x, y, 1e-8, 1e-6), rtol=1e-3)


def test_lshape_forcing_values():
    f = case_lshape().f
    assert f(0.5, 0.5) == 0.0
    assert f(1.0, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert f(0.5, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert f(0.75, 0.5) == pytest.approx(100 * 0.25 * (-0.25) * (0.25 - math.sqrt(2) / 2), rel=1e-14)
    # direct evaluation gives 6.25 * 0.457107 = 2.85692; the quoted 2.8516
    # is a rounding slip, kept here at its own precision
    assert f(0.75, 0.5) == pytest.approx(2.8569174, rel=1e-7)
    assert f(0.75, 0.5) == pytest.approx(2.8516, rel=2e-3)


def test_scaled_case():
    base = case_boundary_layer()
    s = base.scaled(3.0)
    x, y = np.array([0.2, 0.995]), np.array([0.4, 0.6])
    np.testing.assert_allclose(s.f(x, y), 3 * base.f(x, y))
    np.testing.assert_allclose(s.exact.grad(x, y), 3 * base.exact.grad(x, y))
    assert s.layer_width == base.layer_width


def test_quadrature_subdivisions_near_layer():
    case = case_boundary_layer()
    mesh = build_unit_square_mesh(16)
    sub = case.quadrature_subdivisions(mesh)
    near = mesh.origins[:, 0] + mesh.h > 1 - 50 * 1e-3
    assert np.all(sub[near, 0] == math.ceil(2 * mesh.h / 1e-3))
    assert np.all(sub[~near] == 1) and np.all(sub[:, 1] == 1)
    np.testing.assert_array_equal(case_convection_dominated().quadrature_subdivisions(mesh), 1)
