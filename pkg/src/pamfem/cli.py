"""Command-line front end.

    pamfem solve --config PATH [--method timestep|spacetime|both] [--out DIR]
    pamfem compare --a CSV --b CSV
    pamfem mesh-info --config PATH

Exit codes: 0 success, 1 usage or configuration error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .mesh import extrude_spacetime
from .probes import (
    compare_series,
    export_bh_csv,
    export_csv,
    probe_series_spacetime,
    probe_series_timestep,
    read_series_csv,
    write_run_report,
)
from .scenario import (
    ConfigError,
    METHODS,
    ScenarioConfig,
    build_mesh,
    load_config_file,
    spacetime_problem,
    spatial_problem,
)
from .sparsela import SingularMatrixError
from .spacetime import SpacetimeFailure, solve_spacetime
from .timestepping import TransientFailure, run_transient

USAGE_ERROR = 1
SOLVER_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="pamfem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one or both engines on a scenario")
    solve.add_argument("--config", required=True, help="scenario JSON document")
    solve.add_argument("--method", choices=METHODS, help="override the config method")
    solve.add_argument("--out", help="override the config output directory")

    compare = sub.add_parser("compare", help="compare two probe CSV files")
    compare.add_argument("--a", required=True)
    compare.add_argument("--b", required=True)

    info = sub.add_parser("mesh-info", help="print mesh sizes for a scenario")
    info.add_argument("--config", required=True)
    return parser


def _run_timestep(config: ScenarioConfig, mesh, out_dir: str, report_lines: list[str]) -> None:
    problem = spatial_problem(config, mesh)
    traj = run_transient(problem, config.T, config.n_steps, config.newton)
    for i, rep in enumerate(traj.reports, start=1):
        report_lines.append(
            f"timestep step {i}: iterations={rep.iterations} "
            f"final_residual={rep.residual_history[-1]:.6e}"
        )
    for k, probe in enumerate(config.probes):
        series = probe_series_timestep(traj, problem, probe, config)
        export_csv(series, os.path.join(out_dir, f"timestep_probe{k}.csv"))
        for channel in config.bh_channels:
            export_bh_csv(
                series, channel, os.path.join(out_dir, f"timestep_probe{k}_bh{channel}.csv")
            )


def _run_spacetime(config: ScenarioConfig, mesh, out_dir: str, report_lines: list[str]) -> None:
    problem = spacetime_problem(config, mesh)
    sol = solve_spacetime(problem, config.newton)
    rep = sol.report
    report_lines.append(
        f"spacetime: iterations={rep.iterations} "
        f"final_residual={rep.residual_history[-1]:.6e} "
        f"schur_residual={sol.schur_residual:.6e}"
    )
    for k, probe in enumerate(config.probes):
        series = probe_series_spacetime(sol, problem, probe, config)
        export_csv(series, os.path.join(out_dir, f"spacetime_probe{k}.csv"))
        for channel in config.bh_channels:
            export_bh_csv(
                series, channel, os.path.join(out_dir, f"spacetime_probe{k}_bh{channel}.csv")
            )


def _cmd_solve(args) -> int:
    config = load_config_file(args.config)
    if args.method:
        config.method = args.method
    out_dir = args.out if args.out else config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    mesh = build_mesh(config)
    report_lines: list[str] = []
    if config.method in ("timestep", "both"):
        _run_timestep(config, mesh, out_dir, report_lines)
    if config.method in ("spacetime", "both"):
        _run_spacetime(config, mesh, out_dir, report_lines)
    write_run_report(os.path.join(out_dir, "run_report.txt"), report_lines)
    print(f"wrote results to {out_dir}")
    return 0


def _cmd_compare(args) -> int:
    a = read_series_csv(args.a)
    b = read_series_csv(args.b)
    metrics = compare_series(a, b)
    for channel, vals in metrics.items():
        print(
            f"{channel}: max_abs_diff={vals['max_abs_diff']:.6e} "
            f"rel_l2_diff={vals['rel_l2_diff']:.6e}"
        )
    return 0


def _cmd_mesh_info(args) -> int:
    config = load_config_file(args.config)
    mesh = build_mesh(config)
    st_mesh = extrude_spacetime(mesh, config.n_steps, config.T)
    print(f"spatial nodes: {mesh.n_nodes}")
    print(f"spatial triangles: {mesh.n_triangles}")
    print(f"space-time slices: {config.n_steps}")
    print(f"space-time nodes: {st_mesh.n_nodes}")
    print(f"space-time tetrahedra: {st_mesh.n_tets}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "mesh-info":
            return _cmd_mesh_info(args)
        return USAGE_ERROR
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (TransientFailure, SpacetimeFailure, SingularMatrixError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return SOLVER_ERROR


def cli_main(argv=None) -> int:
    """Alias kept for programmatic use."""
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
