"""Finite element functions and element-wise evaluable fields."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import DofMap, Mesh
from .quadrature import ElementTables, q1_shape


@dataclass(frozen=True, eq=False)
class FeFunction:
    """Q1 field given by ``coefficients`` on the mesh nodes listed in ``nodes``.

    All other nodes carry the value zero. For solutions ``nodes`` are the
    free dofs, so the trace on the Dirichlet boundary vanishes.
    """

    mesh: Mesh
    coefficients: np.ndarray
    nodes: np.ndarray

    def __post_init__(self):
        if len(self.coefficients) != len(self.nodes):
            raise ValueError("coefficient vector does not match the dof list")

    @classmethod
    def from_free(cls, mesh: Mesh, dofs: DofMap, coefficients) -> "FeFunction":
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (dofs.n_free,):
            raise ValueError(f"expected {dofs.n_free} coefficients, got {coefficients.shape}")
        return cls(mesh, coefficients, dofs.free_nodes)

    @classmethod
    def interpolate(cls, mesh: Mesh, dofs: DofMap, func) -> "FeFunction":
        pts = mesh.nodes[dofs.free_nodes]
        return cls.from_free(mesh, dofs, func(pts[:, 0], pts[:, 1]))

    def nodal_values(self) -> np.ndarray:
        out = np.zeros(self.mesh.n_nodes)
        out[self.nodes] = self.coefficients
        return out

    def __call__(self, x, y) -> np.ndarray:
        """Point evaluation."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        elem, ref = self.mesh.locate(np.column_stack([x.ravel(), y.ravel()]))
        N = q1_shape(ref[:, 0], ref[:, 1])
        vals = np.sum(self.nodal_values()[self.mesh.elements[elem]] * N, axis=1)
        return vals.reshape(x.shape)


@dataclass(frozen=True)
class ElementField:
    """Field evaluable at the quadrature points of every element.

    ``evaluate(tables)`` returns an array (n_elem, n_q) of values at the
    points of ``tables.rule``; ``order`` is the rule used to integrate it.
    """

    evaluate: Callable[[ElementTables], np.ndarray]
    order: int

    def __add__(self, other: "ElementField") -> "ElementField":
        return ElementField(lambda t: self.evaluate(t) + other.evaluate(t), max(self.order, other.order))

    def scale(self, c: float) -> "ElementField":
        return ElementField(lambda t: c * self.evaluate(t), self.order)
