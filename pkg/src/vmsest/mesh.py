"""Structured quadrilateral meshes on the unit square and the L-shaped domain.

Both domains are subsets of a uniform ``N x N`` grid of square cells on
``(0, 1)^2``; a mesh is described by the grid resolution and a mask of active
cells. Keeping the grid around makes point location and nested-mesh transfer
trivial.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class DomainKind(str, enum.Enum):
    UNIT_SQUARE = "unit_square"
    LSHAPE = "lshape"


class Edge(NamedTuple):
    node_a: int
    node_b: int
    elem_left: int
    elem_right: int
    unit_normal: tuple[float, float]
    length: float


BOUNDARY = -1


@dataclass(frozen=True)
class DofMap:
    """Numbering of the free (non-Dirichlet) nodes.

    ``node_to_dof[i]`` is the free dof index of node ``i`` or ``BOUNDARY``.
    """

    node_to_dof: np.ndarray
    n_free: int

    @property
    def free_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.node_to_dof >= 0)

    @property
    def n_nodes(self) -> int:
        return len(self.node_to_dof)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming mesh of congruent axis-aligned squares of side ``h``.

    Array attributes:

    nodes : (n_nodes, 2) coordinates, lexicographic in (y, x)
    elements : (n_elem, 4) node indices, counterclockwise from lower-left
    edge_nodes, edge_elems : (n_edges, 2) interior edges and their two
        elements (left = smaller element index)
    edge_normals : (n_edges, 2) unit normals pointing from left into right
    cell_map : (N, N) element index of grid cell (j, i) = (row, column), -1
        for inactive cells
    """

    nodes: np.ndarray
    elements: np.ndarray
    edge_nodes: np.ndarray
    edge_elems: np.ndarray
    edge_normals: np.ndarray
    edge_lengths: np.ndarray
    cell_map: np.ndarray
    h: float
    domain_kind: DomainKind
    _boundary: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_edges(self) -> int:
        return len(self.edge_nodes)

    @property
    def grid_size(self) -> int:
        return self.cell_map.shape[0]

    @property
    def interior_edges(self) -> list[Edge]:
        return [
            Edge(int(a), int(b), int(l), int(r), (float(nx), float(ny)), float(ln))
            for (a, b), (l, r), (nx, ny), ln in zip(
                self.edge_nodes, self.edge_elems, self.edge_normals, self.edge_lengths
            )
        ]

    @property
    def origins(self) -> np.ndarray:
        """Lower-left corner of every element, shape (n_elem, 2)."""
        return self.nodes[self.elements[:, 0]]

    @property
    def centroids(self) -> np.ndarray:
        return self.origins + 0.5 * self.h

    @property
    def area(self) -> float:
        return self.n_elements * self.h**2

    def boundary_nodes(self) -> set[int]:
        return set(int(i) for i in self._boundary)

    def dof_map(self) -> DofMap:
        node_to_dof = np.full(self.n_nodes, BOUNDARY, dtype=np.int64)
        free = np.ones(self.n_nodes, dtype=bool)
        free[self._boundary] = False
        node_to_dof[free] = np.arange(int(free.sum()))
        return DofMap(node_to_dof, int(free.sum()))

    def locate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Element index and reference coordinates of each point.

        Points on a shared edge are assigned to the element with the larger
        grid index, except on the top/right edge of the unit square. Raises
        ``ValueError`` for points outside the domain.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.grid_size
        tol = 1e-12
        if np.any(pts < -tol) or np.any(pts > 1.0 + tol):
            raise ValueError("point outside the domain")
        ij = np.floor(pts / self.h).astype(np.int64)
        ij = np.clip(ij, 0, n - 1)
        elem = self.cell_map[ij[:, 1], ij[:, 0]]
        # points on the re-entrant boundary of the L may fall into an inactive
        # cell while touching an active neighbour
        bad = np.flatnonzero(elem < 0)
        for p in bad:
            elem[p] = self._nearest_active(pts[p], ij[p])
        ref = 2.0 * (pts - self.origins[elem]) / self.h - 1.0
        return elem, ref

    def _nearest_active(self, pt, ij) -> int:
        n = self.grid_size
        for di in (0, -1, 1):
            for dj in (0, -1, 1):
                i, j = ij[0] + di, ij[1] + dj
                if 0 <= i < n and 0 <= j < n and self.cell_map[j, i] >= 0:
                    e = self.cell_map[j, i]
                    lo = self.origins[e] - 1e-12
                    if np.all(pt >= lo) and np.all(pt <= lo + self.h + 2e-12):
                        return int(e)
        raise ValueError(f"point {tuple(pt)} outside the domain")


def _build_from_mask(mask: np.ndarray, domain_kind: DomainKind) -> Mesh:
    """Mesh from a boolean (N, N) mask indexed ``mask[row, col]``."""
    n = mask.shape[0]
    h = 1.0 / n
    used = np.zeros((n + 1, n + 1), dtype=bool)
    rows, cols = np.nonzero(mask)
    for dj, di in ((0, 0), (0, 1), (1, 1), (1, 0)):
        used[rows + dj, cols + di] = True
    node_id = np.full((n + 1, n + 1), -1, dtype=np.int64)
    node_id[used] = np.arange(int(used.sum()))
    jj, ii = np.nonzero(used)  # row-major order => lexicographic in (y, x)
    nodes = np.column_stack([ii * h, jj * h])

    cell_map = np.full((n, n), -1, dtype=np.int64)
    cell_map[mask] = np.arange(int(mask.sum()))
    elements = np.column_stack(
        [
            node_id[rows, cols],
            node_id[rows, cols + 1],
            node_id[rows + 1, cols + 1],
            node_id[rows + 1, cols],
        ]
    )

    edge_nodes, edge_elems, normals = [], [], []
    # vertical interior edges between (row, col) and (row, col + 1)
    both = mask[:, :-1] & mask[:, 1:]
    r, c = np.nonzero(both)
    edge_nodes.append(np.column_stack([node_id[r, c + 1], node_id[r + 1, c + 1]]))
    edge_elems.append(np.column_stack([cell_map[r, c], cell_map[r, c + 1]]))
    normals.append(np.tile([1.0, 0.0], (len(r), 1)))
    # horizontal interior edges between (row, col) and (row + 1, col)
    both = mask[:-1, :] & mask[1:, :]
    r, c = np.nonzero(both)
    edge_nodes.append(np.column_stack([node_id[r + 1, c], node_id[r + 1, c + 1]]))
    edge_elems.append(np.column_stack([cell_map[r, c], cell_map[r + 1, c]]))
    normals.append(np.tile([0.0, 1.0], (len(r), 1)))
    edge_nodes = np.concatenate(edge_nodes).astype(np.int64)
    edge_elems = np.concatenate(edge_elems).astype(np.int64)
    normals = np.concatenate(normals)
    # left element has the smaller index; cell ids increase with row and column
    assert np.all(edge_elems[:, 0] < edge_elems[:, 1])

    # boundary = nodes on an element side that has no neighbour
    padded = np.zeros((n + 2, n + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask
    on_bnd = np.zeros((n + 1, n + 1), dtype=bool)
    m = mask
    left_open = m & ~padded[1:-1, :-2]
    right_open = m & ~padded[1:-1, 2:]
    down_open = m & ~padded[:-2, 1:-1]
    up_open = m & ~padded[2:, 1:-1]
    for open_, corners in (
        (left_open, ((0, 0), (1, 0))),
        (right_open, ((0, 1), (1, 1))),
        (down_open, ((0, 0), (0, 1))),
        (up_open, ((1, 0), (1, 1))),
    ):
        rr, cc = np.nonzero(open_)
        for dj, di in corners:
            on_bnd[rr + dj, cc + di] = True
    boundary = np.sort(node_id[on_bnd])

    return Mesh(
        nodes=nodes,
        elements=elements.astype(np.int64),
        edge_nodes=edge_nodes,
        edge_elems=edge_elems,
        edge_normals=normals,
        edge_lengths=np.full(len(edge_nodes), h),
        cell_map=cell_map,
        h=h,
        domain_kind=domain_kind,
        _boundary=boundary,
    )


def build_unit_square_mesh(n: int) -> Mesh:
    """Uniform ``n x n`` mesh of (0, 1)^2 with ``h = 1/n``."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    return _build_from_mask(np.ones((int(n), int(n)), dtype=bool), DomainKind.UNIT_SQUARE)


def lshape_mask(level: int) -> np.ndarray:
    n = 8 * 2**level
    mask = np.ones((n, n), dtype=bool)
    mask[: n // 2, n // 2 :] = False  # rows y < 0.5, columns x > 0.5
    return mask


def build_lshape_mesh(level: int) -> Mesh:
    """L-shaped domain (0,1)^2 minus [0.5,1]x[0,0.5]; 48 * 4**level elements."""
    if isinstance(level, bool) or not isinstance(level, (int, np.integer)) or level < 0:
        raise ValueError(f"level must be a nonnegative integer, got {level!r}")
    return _build_from_mask(lshape_mask(int(level)), DomainKind.LSHAPE)


def boundary_nodes(mesh: Mesh) -> set[int]:
    return mesh.boundary_nodes()


def is_nested(coarse: Mesh, fine: Mesh) -> bool:
    """True if every element of ``fine`` lies inside an element of ``coarse``."""
    if coarse.domain_kind != fine.domain_kind:
        return False
    ratio = fine.grid_size / coarse.grid_size
    if ratio < 1 or ratio != int(ratio):
        return False
    r = int(ratio)
    coarse_mask = coarse.cell_map >= 0
    fine_mask = fine.cell_map >= 0
    return bool(np.array_equal(np.kron(coarse_mask, np.ones((r, r), dtype=bool)), fine_mask))
