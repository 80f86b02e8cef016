"""Command line entry point: ``vmsest run --config cfg.json`` or flag overrides."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .linalg import SolverError
from .study import ConfigError, StudyConfig, StudyError, run_study

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_CONFIG = 3


def _mesh_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid mesh list {text!r}") from None


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 3), not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vmsest", description="Stabilized CDR convergence studies.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run a convergence study")
    run.add_argument("--config", help="JSON study configuration")
    run.add_argument("--case", choices=["convection", "diffusion", "layer", "lshape"])
    run.add_argument("--formulation", choices=["galerkin", "asgs", "osgs"])
    run.add_argument("--estimator", action="append", dest="estimators",
                     choices=["osgs", "asgs", "verfurth0"], help="estimator mode (repeatable)")
    run.add_argument("--meshes", type=_mesh_list, help="mesh sizes or L-shape levels, e.g. 8,16,32")
    run.add_argument("--out", help="output directory")
    run.add_argument("--no-edge-term", action="store_true", help="drop the edge-jump stabilization")
    run.add_argument("--projection", choices=["full", "constrained"], dest="projection_space")
    run.add_argument("--reference-level", type=int, dest="reference_level")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> StudyConfig:
    """JSON file (if any) overlaid with the explicitly given flags."""
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for key in ("case", "formulation", "estimators", "meshes", "out", "projection_space", "reference_level"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    if args.no_edge_term:
        data["edge_term_enabled"] = False
    return StudyConfig.from_dict(data)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        table = run_study(cfg)
    except StudyError as exc:
        if isinstance(exc.__cause__, ConfigError):
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"study failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    cols = table.columns
    print(",".join(cols))
    for row in table.as_rows():
        print(",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
