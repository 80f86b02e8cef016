"""Q1 shape functions and Gauss-Legendre rules on the reference square [-1, 1]^2."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_ORDER = 6

# reference node coordinates, counterclockwise from (-1, -1)
REF_NODES = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray  # (n_q, 2)
    weights: np.ndarray  # (n_q,)

    @property
    def n_points(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class EdgeQuadRule:
    points: np.ndarray  # (n_q,)
    weights: np.ndarray


def _check_order(order: int) -> None:
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)):
        raise ValueError(f"quadrature order must be an integer, got {order!r}")
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"unsupported quadrature order {order}; use 1..{MAX_ORDER}")


@lru_cache(maxsize=None)
def gauss_edge_rule(order: int) -> EdgeQuadRule:
    _check_order(order)
    x, w = np.polynomial.legendre.leggauss(int(order))
    x.flags.writeable = False
    w.flags.writeable = False
    return EdgeQuadRule(x, w)


@lru_cache(maxsize=None)
def gauss_rule(order: int) -> QuadRule:
    """Tensor-product rule with ``order`` points per direction (xi fastest)."""
    r = gauss_edge_rule(order)
    xi, eta = np.meshgrid(r.points, r.points)
    pts = np.column_stack([xi.ravel(), eta.ravel()])
    w = np.outer(r.weights, r.weights).ravel()
    pts.flags.writeable = False
    w.flags.writeable = False
    return QuadRule(pts, w)


def q1_shape(xi, eta) -> np.ndarray:
    """Bilinear basis values; trailing axis of length 4."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    sx, sy = REF_NODES[:, 0], REF_NODES[:, 1]
    return 0.25 * (1.0 + np.multiply.outer(xi, sx)) * (1.0 + np.multiply.outer(eta, sy))


def q1_ref_grad(xi, eta) -> np.ndarray:
    """Reference gradients, shape (..., 4, 2)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    sx, sy = REF_NODES[:, 0], REF_NODES[:, 1]
    dxi = 0.25 * sx * (1.0 + np.multiply.outer(eta, sy))
    deta = 0.25 * sy * (1.0 + np.multiply.outer(xi, sx))
    return np.stack([dxi, deta], axis=-1)


def q1_grad(xi, eta, h: float) -> np.ndarray:
    """Physical gradients on an axis-aligned square of side ``h``."""
    if not h > 0:
        raise ValueError(f"element size must be positive, got {h}")
    return q1_ref_grad(xi, eta) * (2.0 / h)


def q1_hessian(xi, eta, h: float) -> np.ndarray:
    """Physical second derivatives, shape (..., 4, 2, 2).

    Only the mixed derivative of a bilinear function is nonzero, but it is
    computed rather than assumed so the residual code stays literal.
    """
    if not h > 0:
        raise ValueError(f"element size must be positive, got {h}")
    xi = np.asarray(xi, dtype=float)
    shape = xi.shape + (4, 2, 2)
    hess = np.zeros(shape)
    mixed = 0.25 * REF_NODES[:, 0] * REF_NODES[:, 1] * (2.0 / h) ** 2
    hess[..., 0, 1] = mixed
    hess[..., 1, 0] = mixed
    # d2/dxi2 and d2/deta2 of (1 +/- xi)(1 +/- eta) vanish identically
    return hess


def q1_laplacian(xi, eta, h: float) -> np.ndarray:
    hess = q1_hessian(xi, eta, h)
    return hess[..., 0, 0] + hess[..., 1, 1]


@dataclass(frozen=True)
class ElementTables:
    """Basis values/derivatives at the points of one rule, for side ``h``."""

    rule: QuadRule
    N: np.ndarray  # (n_q, 4)
    dN: np.ndarray  # (n_q, 4, 2)
    lapN: np.ndarray  # (n_q, 4)
    jac: float  # det of the reference-to-physical map

    @property
    def weights(self) -> np.ndarray:
        return self.rule.weights * self.jac


@lru_cache(maxsize=64)
def composite_rule(order: int, mx: int = 1, my: int = 1) -> QuadRule:
    """Gauss rule of the given order on each of ``mx x my`` sub-rectangles."""
    if mx < 1 or my < 1:
        raise ValueError("subdivision counts must be >= 1")
    base = gauss_rule(order)
    if mx == my == 1:
        return base
    cx = -1.0 + (2.0 * np.arange(mx) + 1.0) / mx
    cy = -1.0 + (2.0 * np.arange(my) + 1.0) / my
    CX, CY = np.meshgrid(cx, cy)
    centers = np.column_stack([CX.ravel(), CY.ravel()])
    pts = (centers[:, None, :] + base.points[None, :, :] / np.array([mx, my])).reshape(-1, 2)
    w = np.tile(base.weights / (mx * my), len(centers))
    return QuadRule(pts, w)


def element_tables(order: int, h: float, rule: QuadRule | None = None) -> ElementTables:
    rule = rule or gauss_rule(order)
    xi, eta = rule.points[:, 0], rule.points[:, 1]
    return ElementTables(
        rule=rule,
        N=q1_shape(xi, eta),
        dN=q1_grad(xi, eta, h),
        lapN=q1_laplacian(xi, eta, h),
        jac=(h / 2.0) ** 2,
    )


def physical_points(origins: np.ndarray, rule: QuadRule, h: float) -> np.ndarray:
    """Quadrature points mapped into every element, shape (n_elem, n_q, 2)."""
    return origins[:, None, :] + 0.5 * h * (rule.points[None, :, :] + 1.0)
