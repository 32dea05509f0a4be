"""Command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 solver failure, 3 I/O
failure, 64 usage error. Diagnostics go to stderr, data to files. The
``FASTLIMIT_OUTPUT_DIR`` environment variable overrides the output directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .convergence_lab import k_sweep, write_report
from .errors import ConfigError, FastLimitError, GraphError, MissingConfig, SolverError
from .expr_dsl import ExprError
from .grid import write_diagnostics_csv, write_trajectory_csv
from .limit_solver import interface_positions, run_limit, weak_residual
from .monotone_graph import beta_of, graph_from_config, limit_pair, preset
from .rd_solver import DIAGNOSTIC_COLUMNS as RD_COLUMNS
from .rd_solver import run_rd
from .reaction_model import validate_initial_family

log = logging.getLogger("fastlimit")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_IO, EXIT_USAGE = 0, 1, 2, 3, 64
OUTPUT_ENV = "FASTLIMIT_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_config(p, required=True):
    p.add_argument("--config", "-c", required=required, help="TOML run configuration")
    p.add_argument("--out", help="output directory (overrides config and environment)")
    p.add_argument("--n-cells", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--stride", type=int)


def build_parser():
    parser = _Parser(prog="fastlimit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("run-rd", help="integrate the reaction-diffusion system at one k")
    _add_config(p)
    p.add_argument("--k", type=float)

    p = sub.add_parser("run-limit", help="integrate the limit nonlinear diffusion problem")
    _add_config(p)

    p = sub.add_parser("sweep", help="k-sweep against the limit solution")
    _add_config(p)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("graph-info", help="tabulate resolvent, beta and the limit split")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset")
    src.add_argument("--config", "-c")
    p.add_argument("--sample", type=float, nargs="+", required=True)
    p.add_argument("--d1", type=float, default=1.0)
    p.add_argument("--d2", type=float, default=0.0)

    p = sub.add_parser("validate-init", help="check the initial-data bound at one k")
    _add_config(p)
    p.add_argument("--k", type=float)

    p = sub.add_parser("residual", help="weak-form residual of a limit run")
    _add_config(p)
    return parser


def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    return cfg.with_overrides(
        **{
            "grid.n_cells": args.n_cells,
            "time.dt": args.dt,
            "time.T": args.T,
            "time.stride": args.stride,
        }
    )


def _outdir(args, cfg) -> Path:
    out = args.out or os.environ.get(OUTPUT_ENV) or cfg.output.directory
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_meta(path: Path, cfg: RunConfig, **extra):
    meta = {"config_hash": cfg.config_hash, "tool_version": __version__, **extra}
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def cmd_run_rd(args):
    cfg = _load(args)
    k = args.k if args.k is not None else cfg.problem.k
    grid = cfg.build_grid()
    init = cfg.build_initial(grid)
    u0, v0 = init.family(k)
    res = run_rd(cfg.build_spec(k), u0, v0, grid, cfg.time.T, cfg.time.dt, cfg.time.stride, cfg.time.splitting)
    out = _outdir(args, cfg)
    tag = f"rd_k{k:g}"
    write_trajectory_csv(res.trajectory, grid, out / f"{tag}_snapshots.csv", ["u", "v"])
    write_diagnostics_csv(res.diagnostics, out / f"{tag}_diagnostics.csv", RD_COLUMNS)
    _write_meta(out / f"{tag}_meta.json", cfg, k=k)
    log.warning("run-rd k=%g done: D_alpha=%.6g D_gamma=%.6g", k, res.final.D_alpha, res.final.D_gamma)
    return EXIT_OK


def cmd_run_limit(args):
    cfg = _load(args)
    grid = cfg.build_grid()
    init = cfg.build_initial(grid)
    spec = cfg.build_limit_spec()
    res = run_limit(spec, init.u0 + init.v0, grid, cfg.time.T, cfg.time.dt, cfg.time.stride)
    out = _outdir(args, cfg)
    write_trajectory_csv(res.trajectory, grid, out / "limit_snapshots.csv", ["z", "u_star", "v_star"])
    write_diagnostics_csv(
        res.diagnostics, out / "limit_diagnostics.csv", ("t", "mass_z", "l2_z", "linf_z", "newton_iters", "residual")
    )
    crossings = interface_positions(res.trajectory, grid)
    if crossings:
        with (out / "limit_interface.csv").open("w") as fh:
            fh.write("t,x_interface\n")
            for t, x in crossings:
                fh.write(f"{t!r},{x!r}\n")
    _write_meta(out / "limit_meta.json", cfg, nonunique_regime=spec.nonunique_regime)
    if spec.nonunique_regime:
        log.warning("limit problem is in the non-uniqueness regime (d2 = 0, flat beta, source present)")
    log.warning("run-limit done: %d snapshots", len(res.trajectory.times))
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load(args)
    report = k_sweep(cfg, jobs=max(1, args.jobs))
    out = _outdir(args, cfg)
    write_report(report, out / "report.csv")
    slope = "null" if report.slope_l1_u is None else f"{report.slope_l1_u:.4f}"
    print(f"sweep: {len(report.rows)} k values, slope_l1_u={slope}, report={out / 'report.csv'}", file=sys.stderr)
    if report.failures:
        for k, msg in report.failures.items():
            log.error("k=%s failed: %s", k, msg)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_graph_info(args):
    if args.preset:
        g = preset(args.preset)
        d1, d2 = args.d1, args.d2
    else:
        cfg = RunConfig.load(args.config)
        g = graph_from_config(cfg.problem.graph)
        d1, d2 = cfg.problem.d1, cfg.problem.d2
    print("s,resolvent,beta,u_star,v_star")
    for s in args.sample:
        u, v = limit_pair(g, s)
        print(f"{s!r},{g.resolvent(1.0, s)!r},{beta_of(g, d1, d2, s)!r},{u!r},{v!r}")
    return EXIT_OK


def cmd_validate_init(args):
    cfg = _load(args)
    k = args.k if args.k is not None else cfg.problem.k
    init = cfg.build_initial()
    check = validate_initial_family(cfg.build_spec(k), init, k)
    status = "pass" if check.passed else "fail"
    print(
        f"validate-init k={k:g}: {status} max_residual={check.max_residual:.6g} "
        f"max_F={check.max_F:.6g} C5/k={init.C5 / k:.6g} l2={check.l2_sum:.6g} "
        f"laplacian_l1={check.laplacian_l1:.6g}",
        file=sys.stderr,
    )
    return EXIT_OK if check.passed else EXIT_INVALID


def cmd_residual(args):
    cfg = _load(args)
    grid = cfg.build_grid()
    init = cfg.build_initial(grid)
    spec = cfg.build_limit_spec()
    res = run_limit(spec, init.u0 + init.v0, grid, cfg.time.T, cfg.time.dt, cfg.time.stride)
    r = weak_residual(res.trajectory, spec, grid)
    print(f"weak_residual={r!r} n_cells={grid.n_cells} dt={cfg.time.dt!r}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "run-rd": cmd_run_rd,
    "run-limit": cmd_run_limit,
    "sweep": cmd_sweep,
    "graph-info": cmd_graph_info,
    "validate-init": cmd_validate_init,
    "residual": cmd_residual,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except MissingConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, GraphError, ExprError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FastLimitError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
