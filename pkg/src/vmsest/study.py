"""Convergence studies: solve on a mesh sequence, estimate, tabulate, write files."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .assembly import zero_forcing
from .cases import BenchmarkCase, ExactSolution, get_case
from .estimator import (
    DegenerateNormalization, EstimatorMode, ErrorReport, effectivity, error_norms, estimate, reference_error,
)
from .fields import FeFunction
from .formulations import Discretization, FormulationKind, Kind, SolveInfo, StabConstants, compute_tau, solve_formulation
from .io import write_csv, write_vtk
from .linalg import SolverConfig
from .mesh import DomainKind, Mesh, build_lshape_mesh, build_unit_square_mesh
from .projection import ProjectionSpace

log = logging.getLogger(__name__)

DEFAULT_SQUARE_MESHES = [8, 16, 32, 64, 128, 256]
DEFAULT_LAYER_MESHES = [8, 16, 32, 64, 128, 256, 512]
DEFAULT_LSHAPE_LEVELS = [0, 1, 2, 3]
DEFAULT_REFERENCE_LEVEL = 5


class ConfigError(ValueError):
    pass


class StudyError(RuntimeError):
    def __init__(self, msg, table=None):
        super().__init__(msg)
        self.table = table


@dataclass
class LineSpec:
    y: float = 0.5
    n_samples: int = 201
    mesh: int | None = None  # mesh entry to sample; default the finest


@dataclass
class StudyConfig:
    case: str = "convection"
    formulation: str = "osgs"
    edge_term_enabled: bool = True
    f_in_residual: bool = True
    projection_space: str = "constrained"
    osgs_solver: str = "block"
    estimators: list[str] | None = None
    meshes: list[int] | None = None
    reference_level: int | None = None
    solver: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    out: str | None = None
    line: LineSpec | None = None
    write_maps: bool = True
    zero_forcing: bool = False

    def __post_init__(self):
        try:
            self.kind = FormulationKind(self.formulation, self.edge_term_enabled, self.f_in_residual,
                                        ProjectionSpace(self.projection_space), self.osgs_solver)
            self.solver_config = SolverConfig(**self.solver)
            self.stab_constants = StabConstants(**self.constants)
            case = get_case(self.case)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.estimators is None:
            self.estimators = ["asgs" if self.kind.kind is Kind.ASGS else "osgs"]
        if not self.estimators:
            raise ConfigError("at least one estimator mode is required")
        try:
            self.estimators = [EstimatorMode(m).value for m in self.estimators]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.meshes is None:
            if case.domain_kind is DomainKind.LSHAPE:
                self.meshes = list(DEFAULT_LSHAPE_LEVELS)
            elif case.name == "layer":
                self.meshes = list(DEFAULT_LAYER_MESHES)
            else:
                self.meshes = list(DEFAULT_SQUARE_MESHES)
        self.meshes = [int(m) for m in self.meshes]
        if not self.meshes or any(b <= a for a, b in zip(self.meshes, self.meshes[1:])):
            raise ConfigError("mesh sequence must be non-empty and strictly increasing")
        if case.domain_kind is DomainKind.LSHAPE:
            if self.reference_level is None:
                self.reference_level = DEFAULT_REFERENCE_LEVEL
            if self.reference_level <= self.meshes[-1]:
                raise ConfigError("reference level must exceed every study level")
        if isinstance(self.line, dict):
            self.line = LineSpec(**self.line)

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "StudyConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {f.name: (asdict(getattr(self, f.name)) if isinstance(getattr(self, f.name), LineSpec)
                         else getattr(self, f.name)) for f in fields(self)}

    def resolve_case(self) -> BenchmarkCase:
        case = get_case(self.case)
        if self.zero_forcing:
            exact = None
            if case.exact is not None:
                z = zero_forcing
                exact = ExactSolution(z, lambda x, y: np.stack([z(x, y), z(x, y)]), z)
            case = BenchmarkCase(case.name, case.params.with_forcing(zero_forcing), case.domain_kind, exact)
        return case


def rate(q0: float, q1: float, h0: float, h1: float) -> float:
    """Observed order ``log(q0/q1) / log(h0/h1)``; NaN when undefined."""
    if not (q0 > 0 and q1 > 0 and math.isfinite(q0) and math.isfinite(q1)):
        return float("nan")
    return math.log(q0 / q1) / math.log(h0 / h1)


@dataclass
class ConvergenceTable:
    modes: list[str]
    rows: list[dict] = field(default_factory=list)
    # per-mesh solutions and reports of the run (not serialized)
    results: list = field(default_factory=list, repr=False)

    @property
    def columns(self) -> list[str]:
        cols = ["h", "ndofs", "relL2", "rateL2", "relStab", "rateStab"]
        cols += [f"eta_{m}" for m in self.modes]
        cols += [f"ieff_{m}" for m in self.modes]
        cols += ["iters", "absL2", "absStab"]
        cols += [f"rateEta_{m}" for m in self.modes]
        return cols

    def append(self, row: dict) -> None:
        prev = self.rows[-1] if self.rows else None
        h = row["h"]
        if prev is None:
            row["rateL2"] = row["rateStab"] = float("nan")
            for m in self.modes:
                row[f"rateEta_{m}"] = float("nan")
        else:
            # the absolute stabilized error is the quantity eta estimates; the
            # normalized one carries the h-dependent tau_K in its denominator
            row["rateL2"] = rate(prev["relL2"], row["relL2"], prev["h"], h)
            row["rateStab"] = rate(prev["absStab"], row["absStab"], prev["h"], h)
            for m in self.modes:
                row[f"rateEta_{m}"] = rate(prev[f"eta_{m}"], row[f"eta_{m}"], prev["h"], h)
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def as_rows(self) -> list[list]:
        return [[r[c] for c in self.columns] for r in self.rows]


def write_table(table: ConvergenceTable, path) -> Path:
    return write_csv(table.columns, table.as_rows(), path)


def build_mesh(case: BenchmarkCase, size: int) -> Mesh:
    if case.domain_kind is DomainKind.LSHAPE:
        return build_lshape_mesh(size)
    return build_unit_square_mesh(size)


def line_sample(u_h: FeFunction, exact=None, y: float = 0.5, n_samples: int = 201) -> np.ndarray:
    """Columns (x, u_h(x, y), exact(x, y)) at equispaced x in [0, 1]."""
    if not 0.0 < y < 1.0:
        raise ValueError(f"sample line y = {y} is not inside the domain")
    x = np.linspace(0.0, 1.0, int(n_samples))
    yy = np.full_like(x, y)
    uh = u_h(x, yy)
    ex = np.asarray(exact(x, yy), dtype=float) * np.ones_like(x) if exact is not None else np.full_like(x, np.nan)
    return np.column_stack([x, uh, ex])


@dataclass
class MeshResult:
    size: int
    mesh: Mesh
    u_h: FeFunction
    estimates: dict
    errors: ErrorReport | None
    info: SolveInfo


def _errors_square(case: BenchmarkCase, mesh: Mesh, u_h: FeFunction, stab) -> ErrorReport:
    sub = case.quadrature_subdivisions(mesh)
    try:
        return error_norms(mesh, u_h, case.exact.value, case.exact.grad, case.params, stab, subdivisions=sub)
    except DegenerateNormalization:
        # zero reference: report zero errors when the discrete solution is zero too
        if np.any(u_h.coefficients):
            raise
        return ErrorReport(0.0, 0.0, 0.0, 0.0, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), np.zeros(mesh.n_elements))


def solve_on(case: BenchmarkCase, mesh: Mesh, cfg: StudyConfig):
    disc = Discretization.build(mesh, case.params)
    stab = compute_tau(case.params, mesh.h, cfg.stab_constants)
    info = SolveInfo()
    u_h = solve_formulation(disc, stab, cfg.kind, cfg.solver_config, info)
    return disc, stab, u_h, info


def run_study(cfg: StudyConfig) -> ConvergenceTable:
    """Solve, estimate and measure errors on every mesh of the sequence.

    Writes ``table.csv`` (and maps/profile) into ``cfg.out`` when set. A
    failure writes the rows done so far plus ``error.json`` and raises
    ``StudyError``.
    """
    case = cfg.resolve_case()
    out = Path(cfg.out) if cfg.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    table = ConvergenceTable(list(cfg.estimators))
    results: list[MeshResult] = []
    reference = None
    try:
        if case.domain_kind is DomainKind.LSHAPE:
            ref_mesh = build_lshape_mesh(cfg.reference_level)
            reference = solve_on(case, ref_mesh, cfg)[2]
        for size in cfg.meshes:
            mesh = build_mesh(case, size)
            disc, stab, u_h, info = solve_on(case, mesh, cfg)
            estimates = {}
            for m in cfg.estimators:
                ws = disc.workspace(cfg.kind.projection_space)
                estimates[m] = estimate(ws, case.params, stab, u_h, m)
            if reference is not None:
                errors = reference_error(u_h, reference)
            else:
                errors = _errors_square(case, mesh, u_h, stab)
            row = {"h": mesh.h, "ndofs": disc.dofs.n_free, "relL2": errors.rel_L2, "relStab": errors.rel_stab,
                   "absL2": errors.abs_L2, "absStab": errors.abs_stab, "iters": info.iterations}
            for m, est in estimates.items():
                row[f"eta_{m}"] = est.eta
                try:
                    row[f"ieff_{m}"] = effectivity(est, errors.abs_stab)
                except DegenerateNormalization:
                    row[f"ieff_{m}"] = float("nan")
            table.append(row)
            results.append(MeshResult(size, mesh, u_h, estimates, errors, info))
            log.info("mesh %s: h=%.4g relL2=%.3e eta=%s", size, mesh.h, errors.rel_L2,
                     {m: round(e.eta, 6) for m, e in estimates.items()})
    except Exception as exc:
        if out is not None:
            if table.rows:
                write_table(table, out / "table.csv")
            (out / "error.json").write_text(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                                        "completed_meshes": len(table.rows)}, indent=2) + "\n")
        raise StudyError(f"study aborted on mesh {len(table.rows)}: {exc}", table) from exc

    if out is not None:
        _write_outputs(cfg, case, table, results, out)
    table.results = results
    return table


def _write_outputs(cfg: StudyConfig, case: BenchmarkCase, table: ConvergenceTable, results, out: Path) -> None:
    write_table(table, out / "table.csv")
    if cfg.write_maps:
        for r in results:
            d = out / f"mesh_{r.size}"
            d.mkdir(exist_ok=True)
            u = r.u_h.nodal_values()
            cells = {}
            for m, est in r.estimates.items():
                cells[f"eta_K_{m}"] = est.eta_K
            write_vtk(r.mesh, d / "eta_map.vtk", cells, {"u_h": u})
            err_cells = {}
            if r.errors is not None and r.errors.element_stab is not None:
                err_cells["stab_error_K"] = np.sqrt(np.maximum(r.errors.element_stab, 0.0))
            write_vtk(r.mesh, d / "error_map.vtk", err_cells, {"u_h": u})
    if cfg.line is not None:
        target = cfg.line.mesh if cfg.line.mesh is not None else results[-1].size
        match = [r for r in results if r.size == target]
        if not match:
            raise ConfigError(f"line sample mesh {target} is not in the mesh sequence")
        exact = case.exact.value if case.exact is not None else None
        prof = line_sample(match[0].u_h, exact, cfg.line.y, cfg.line.n_samples)
        write_csv(["x", "u_h", "exact"], prof.tolist(), out / "profile.csv")
