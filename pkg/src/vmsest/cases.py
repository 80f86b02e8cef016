"""Benchmark problems with manufactured solutions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .assembly import PhysicalParams
from .mesh import DomainKind


@dataclass(frozen=True)
class ExactSolution:
    value: Callable
    grad: Callable  # returns stacked (du/dx, du/dy)
    laplacian: Callable


@dataclass(frozen=True)
class BenchmarkCase:
    name: str
    params: PhysicalParams
    domain_kind: DomainKind
    exact: ExactSolution | None
    # width of an outflow layer at x = 1, if the exact solution has one
    layer_width: float | None = None

    def quadrature_subdivisions(self, mesh) -> np.ndarray:
        """Per-element (mx, my) sub-rectangle counts for exact-error integrals.

        Elements within 50 layer widths of x = 1 are split in x so that every
        sub-rectangle is at most half a layer width wide.
        """
        sub = np.ones((mesh.n_elements, 2), dtype=np.int64)
        if self.layer_width is None:
            return sub
        w = self.layer_width
        near = mesh.origins[:, 0] + mesh.h > 1.0 - 50.0 * w
        sub[near, 0] = max(1, int(np.ceil(2.0 * mesh.h / w)))
        return sub

    @property
    def f(self):
        return self.params.f

    def scaled(self, c: float) -> "BenchmarkCase":
        """Same problem with forcing and exact solution multiplied by ``c``."""
        p = self.params
        f = p.f
        params = p.with_forcing(lambda x, y: c * f(x, y))
        exact = None
        if self.exact is not None:
            e = self.exact
            exact = ExactSolution(
                lambda x, y: c * e.value(x, y),
                lambda x, y: c * np.asarray(e.grad(x, y)),
                lambda x, y: c * e.laplacian(x, y),
            )
        return BenchmarkCase(self.name, params, self.domain_kind, exact, self.layer_width)


def manufactured_forcing(k: float, a, s: float, exact: ExactSolution):
    """``f = -k lap u + a.grad u + s u``."""
    a = tuple(float(v) for v in a)

    def f(x, y):
        gx, gy = exact.grad(x, y)
        return -k * exact.laplacian(x, y) + a[0] * gx + a[1] * gy + s * exact.value(x, y)

    return f


def _manufactured(name, k, a, s, exact, layer_width=None) -> BenchmarkCase:
    params = PhysicalParams(k, a, s, manufactured_forcing(k, a, s, exact))
    return BenchmarkCase(name, params, DomainKind.UNIT_SQUARE, exact, layer_width)


# u = 100 (1-x)^2 x^2 y (1-2y)(1-y) = 100 P(x) Q(y)


def _P(x):
    return x**2 * (1.0 - x) ** 2


def _dP(x):
    return 2.0 * x - 6.0 * x**2 + 4.0 * x**3


def _d2P(x):
    return 2.0 - 12.0 * x + 12.0 * x**2


def _Q(y):
    return y * (1.0 - 2.0 * y) * (1.0 - y)


def _dQ(y):
    return 1.0 - 6.0 * y + 6.0 * y**2


def _d2Q(y):
    return -6.0 + 12.0 * y


POLYNOMIAL_SOLUTION = ExactSolution(
    value=lambda x, y: 100.0 * _P(x) * _Q(y),
    grad=lambda x, y: np.stack(np.broadcast_arrays(100.0 * _dP(x) * _Q(y), 100.0 * _P(x) * _dQ(y))),
    laplacian=lambda x, y: 100.0 * (_d2P(x) * _Q(y) + _P(x) * _d2Q(y)),
)


def case_convection_dominated() -> BenchmarkCase:
    return _manufactured("convection", 1e-5, (0.4, 0.7), 1e-5, POLYNOMIAL_SOLUTION)


def case_diffusion_dominated() -> BenchmarkCase:
    return _manufactured("diffusion", 1.0, (0.4e-5, 0.7e-5), 1e-5, POLYNOMIAL_SOLUTION)


def boundary_layer_solution(k: float) -> ExactSolution:
    """``u = (x - (e^{-(1-x)/k} - e^{-1/k}) / (1 - e^{-1/k})) y (1-y)``.

    Every exponent is <= 0 on the closed square, so nothing overflows; for
    small ``k`` the constant ``e^{-1/k}`` underflows to zero, which changes
    the result by less than 1e-300.
    """
    e0 = np.exp(-1.0 / k)
    denom = 1.0 - e0

    def E(x):
        return np.exp(-(1.0 - np.asarray(x, dtype=float)) / k)

    def g(x):
        return x - (E(x) - e0) / denom

    def dg(x):
        return 1.0 - E(x) / (k * denom)

    def d2g(x):
        return -E(x) / (k**2 * denom)

    def Y(y):
        return y * (1.0 - y)

    return ExactSolution(
        value=lambda x, y: g(x) * Y(y),
        grad=lambda x, y: np.stack(np.broadcast_arrays(dg(x) * Y(y), g(x) * (1.0 - 2.0 * y))),
        laplacian=lambda x, y: d2g(x) * Y(y) - 2.0 * g(x),
    )


def case_boundary_layer() -> BenchmarkCase:
    k = 1e-3
    return _manufactured("layer", k, (1.0, 1.0), 1.0, boundary_layer_solution(k), layer_width=k)


def lshape_forcing(x, y):
    r = np.hypot(x - 0.5, y - 0.5)
    return 100.0 * r * (r - 0.5) * (r - np.sqrt(2.0) / 2.0)


def case_lshape() -> BenchmarkCase:
    params = PhysicalParams(1e-6, (1.0, 3.0), 1.0, lshape_forcing)
    return BenchmarkCase("lshape", params, DomainKind.LSHAPE, None)


CASES = {
    "convection": case_convection_dominated,
    "diffusion": case_diffusion_dominated,
    "layer": case_boundary_layer,
    "lshape": case_lshape,
}


def get_case(name: str) -> BenchmarkCase:
    try:
        return CASES[name]()
    except KeyError:
        raise ValueError(f"unknown case {name!r}; choose from {sorted(CASES)}") from None
