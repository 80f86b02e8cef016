"""Legacy VTK and CSV output."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .mesh import Mesh

VTK_QUAD = 9


def _fmt(v: float) -> str:
    return repr(float(v))


def write_vtk(mesh: Mesh, path, cell_data: Mapping[str, Sequence[float]] | None = None,
              point_data: Mapping[str, Sequence[float]] | None = None, title: str = "vmsest") -> Path:
    """ASCII legacy VTK unstructured grid of quads with scalar cell/point data."""
    cell_data = dict(cell_data or {})
    point_data = dict(point_data or {})
    for name, vals in cell_data.items():
        if len(vals) != mesh.n_elements:
            raise ValueError(f"cell data {name!r} has {len(vals)} values, mesh has {mesh.n_elements} cells")
    for name, vals in point_data.items():
        if len(vals) != mesh.n_nodes:
            raise ValueError(f"point data {name!r} has {len(vals)} values, mesh has {mesh.n_nodes} points")

    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_nodes} double")
    lines.extend(f"{_fmt(x)} {_fmt(y)} 0.0" for x, y in mesh.nodes)
    lines.append(f"CELLS {mesh.n_elements} {5 * mesh.n_elements}")
    lines.extend("4 " + " ".join(str(int(i)) for i in el) for el in mesh.elements)
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    lines.extend([str(VTK_QUAD)] * mesh.n_elements)
    for header, data, count in (("CELL_DATA", cell_data, mesh.n_elements),
                                ("POINT_DATA", point_data, mesh.n_nodes)):
        if not data:
            continue
        lines.append(f"{header} {count}")
        for name, vals in data.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(_fmt(v) for v in vals)
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk(path) -> dict:
    """Minimal reader for files produced by :func:`write_vtk`."""
    tokens = Path(path).read_text().split("\n")
    out: dict = {"cell_data": {}, "point_data": {}}
    i = 4
    section = None
    while i < len(tokens):
        line = tokens[i].strip()
        i += 1
        if not line:
            continue
        head = line.split()
        if head[0] == "POINTS":
            n = int(head[1])
            out["points"] = np.array([[float(v) for v in tokens[i + j].split()] for j in range(n)])
            i += n
        elif head[0] == "CELLS":
            n = int(head[1])
            out["cells"] = np.array([[int(v) for v in tokens[i + j].split()[1:]] for j in range(n)])
            i += n
        elif head[0] == "CELL_TYPES":
            n = int(head[1])
            out["cell_types"] = np.array([int(tokens[i + j]) for j in range(n)])
            i += n
        elif head[0] in ("CELL_DATA", "POINT_DATA"):
            section = ("cell_data" if head[0] == "CELL_DATA" else "point_data", int(head[1]))
        elif head[0] == "SCALARS":
            key, n = section
            i += 1  # LOOKUP_TABLE
            out[key][head[1]] = np.array([float(tokens[i + j]) for j in range(n)])
            i += n
    return out


def _csv_value(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.17g}"


def write_csv(columns: Sequence[str], rows: Sequence[Sequence], path) -> Path:
    if not rows:
        raise ValueError("refusing to write an empty table")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_csv_value(v) for v in row])
    return path
