"""
Command line driver.

Exit codes: 0 success, 2 input error, 3 convergence failure, 4 domain or
precondition error, 5 invariant violation.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from time import time
from typing import Sequence

import pandas as pd

from vortexforge import __version__, api
from vortexforge.configurations import available, load_configuration
from vortexforge.desingularize import NewtonSettings
from vortexforge.exceptions import (
    ConvergenceError,
    DomainError,
    InputError,
    InvariantViolation,
    PreconditionError,
)
from vortexforge.persistence import RunConfig, dumps
from vortexforge.pointvortex import classify_nondegeneracy, coordinate_names

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONVERGENCE = 3
EXIT_DOMAIN = 4
EXIT_INVARIANT = 5

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]

_cli_log = logging.getLogger("vortexforge.cli")


def setup_logging(level: str | None = None):
    level = (level or os.environ.get("VORTEXFORGE_LOG_LEVEL") or "WARNING").upper()
    if level not in LOG_LEVELS:
        raise InputError(f"Unknown log level {level}; valid levels are {LOG_LEVELS}")
    logging.basicConfig(level=level, format=LOG_FORMAT)


def _print_json(data: dict):
    print(json.dumps(data, indent=2, default=str))


def _cmd_pv_check(args: argparse.Namespace) -> int:
    cfg = load_configuration(args.config)
    summary = api.check_configuration(args.config)
    table = pd.DataFrame(
        {
            "vortex": range(1, cfg.M + 1),
            "gamma": cfg.circulations,
            "re_zeta": cfg.centers.real,
            "im_zeta": cfg.centers.imag,
            "re_V": [v[0] for v in summary["residual"]],
            "im_V": [v[1] for v in summary["residual"]],
        }
    )
    print(table.to_string(index=False))
    print(f"max |V_k|: {summary['max_residual']:.3e}")
    print(f"identity defects: {summary['identity_defects'][0]:.3e}, {summary['identity_defects'][1]:.3e}")
    if not summary["steady"]:
        print("not steady")
        return EXIT_DOMAIN
    classification = summary["classification"]
    print(f"steady, {summary['kind']}")
    if classification is None:
        return EXIT_OK
    print(f"codim {classification['codim']}, rank {classification['rank']}, nondegenerate {classification['nondegenerate']}")
    return EXIT_OK if classification["nondegenerate"] else EXIT_DOMAIN


def _cmd_pv_classify(args: argparse.Namespace) -> int:
    steady = classify_nondegeneracy(load_configuration(args.config))
    _print_json({**steady.to_dict(), "singular_values": list(steady.singular_values)})
    return EXIT_OK if steady.nondegenerate else EXIT_DOMAIN


def _cmd_pv_solve(args: argparse.Namespace) -> int:
    cfg = api.solve_configuration(args.config, args.output)
    coordinates = dict(zip(coordinate_names(cfg.M), cfg.coordinates().tolist()))
    _print_json({name: coordinates[name] for name in cfg.split.varying})
    return EXIT_OK


def _cmd_hv_desingularize(args: argparse.Namespace) -> int:
    settings = NewtonSettings(residual_tol=args.tol) if args.tol else None
    point = api.desingularize(args.config, args.rho, N=args.N, n_nodes=args.n_nodes, settings=settings, output_path=args.output)
    state = point.state
    _print_json(
        {
            "rho": state.rho,
            "lambda": dict(zip(state.split.varying, state.lam.tolist())),
            "Q": state.Q.tolist(),
            "n_conf": point.diagnostics.n_conf,
            "n_vel": point.diagnostics.n_vel,
        }
    )
    return EXIT_OK


def _run_config(args: argparse.Namespace) -> RunConfig:
    data = {}
    if args.run_config:
        data = RunConfig.from_file(args.run_config).to_dict()
    for name in ("scenario", "N", "rho_start", "rho_max", "step", "max_steps"):
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    return RunConfig.from_dict(data)


def _cmd_hv_continue(args: argparse.Namespace) -> int:
    run_config = None
    if not args.resume or args.run_config:
        run_config = _run_config(args)
    output = args.output
    if output is None:
        if run_config is None:
            raise InputError("--resume needs --output or a run configuration")
        output = run_config.output_dir / "branch.jsonl"
    result = api.continue_branch_to_file(run_config, output, resume=args.resume)
    _print_json(
        {
            "output": str(output),
            "points": len(result.points),
            "reason": result.reason.value,
            "fired": result.fired,
            "note": result.note,
            "rho_last": result.points[-1].state.rho if result.points else None,
        }
    )
    return EXIT_OK


def _cmd_hv_diagnose(args: argparse.Namespace) -> int:
    report = api.diagnose_state(args.branch, index=args.index, compute_momentum=args.momentum)
    print(dumps(report.to_dict()) if args.compact else json.dumps(report.to_dict(), indent=2))
    failures = report.gate_failures()
    if failures:
        print(f"failed gates: {', '.join(failures)}")
        return EXIT_INVARIANT
    return EXIT_OK


def _cmd_hv_export(args: argparse.Namespace) -> int:
    boundaries, table = api.export_branch(args.branch, args.output_dir)
    print(f"{len(boundaries)} boundary rows, {len(table)} branch rows")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vortexforge", description="Point-vortex equilibria and hollow-vortex branches"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__.version}")
    parser.add_argument("--log-level", choices=LOG_LEVELS, default=None, help="Default: VORTEXFORGE_LOG_LEVEL or WARNING")
    groups = parser.add_subparsers(dest="group", required=True)
    config_help = f"Configuration file or packaged name ({', '.join(available())})"

    pv = groups.add_parser("pv", help="Steady point-vortex configurations")
    pv_sub = pv.add_subparsers(dest="command", required=True)
    check = pv_sub.add_parser("check", help="Residual, identities and classification")
    check.add_argument("config", help=config_help)
    check.set_defaults(handler=_cmd_pv_check)
    classify = pv_sub.add_parser("classify", help="Kind, codimension and non-degeneracy of the split")
    classify.add_argument("config", help=config_help)
    classify.set_defaults(handler=_cmd_pv_classify)
    solve = pv_sub.add_parser("solve", help="Solve for the varying coordinates")
    solve.add_argument("config", help=config_help)
    solve.add_argument("--output", type=Path, default=None, help="Write the solved configuration here")
    solve.set_defaults(handler=_cmd_pv_solve)

    hv = groups.add_parser("hv", help="Hollow-vortex desingularization")
    hv_sub = hv.add_subparsers(dest="command", required=True)
    desing = hv_sub.add_parser("desingularize", help="Solve at a single radius")
    desing.add_argument("config", help=config_help)
    desing.add_argument("--rho", type=float, required=True)
    desing.add_argument("--N", type=int, default=64)
    desing.add_argument("--n-nodes", type=int, default=0)
    desing.add_argument("--tol", type=float, default=None, help="Newton residual tolerance")
    desing.add_argument("--output", type=Path, default=None, help="Branch file receiving the point")
    desing.set_defaults(handler=_cmd_hv_desingularize)

    cont = hv_sub.add_parser("continue", help="Follow a branch in ρ")
    cont.add_argument("run_config", nargs="?", default=None, help="Run configuration JSON file")
    cont.add_argument("--scenario", default=None, help=config_help)
    cont.add_argument("--N", type=int, default=None)
    cont.add_argument("--rho-start", dest="rho_start", type=float, default=None)
    cont.add_argument("--rho-max", dest="rho_max", type=float, default=None)
    cont.add_argument("--step", type=float, default=None)
    cont.add_argument("--max-steps", dest="max_steps", type=int, default=None)
    cont.add_argument("--output", type=Path, default=None, help="Branch file, default <output_dir>/branch.jsonl")
    cont.add_argument("--resume", action="store_true", help="Continue the run stored in --output")
    cont.set_defaults(handler=_cmd_hv_continue)

    diag = hv_sub.add_parser("diagnose", help="Diagnostics of a stored branch point")
    diag.add_argument("branch", type=Path)
    diag.add_argument("--index", type=int, default=-1)
    diag.add_argument("--momentum", action="store_true", help="Evaluate the momentum identity")
    diag.add_argument("--compact", action="store_true", help="Single-line JSON")
    diag.set_defaults(handler=_cmd_hv_diagnose)

    export = hv_sub.add_parser("export", help="Boundary curves and branch table to CSV")
    export.add_argument("branch", type=Path)
    export.add_argument("--output-dir", type=Path, default=None)
    export.set_defaults(handler=_cmd_hv_export)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    command = f"{args.group} {args.command}"
    try:
        setup_logging(args.log_level)
    except InputError as exc:
        print(f"[input error] {exc}", file=sys.stderr)
        return EXIT_INPUT
    start = time()
    _cli_log.info("Running %s", command)

    try:
        exit_code = int(args.handler(args))
    except InputError as exc:
        print(f"[input error] {exc}", file=sys.stderr)
        exit_code = EXIT_INPUT
    except ConvergenceError as exc:
        print(f"[convergence failure] {exc} (last residual {exc.last_residual:.3e})", file=sys.stderr)
        exit_code = EXIT_CONVERGENCE
    except (DomainError, PreconditionError) as exc:
        print(f"[domain error] {exc}", file=sys.stderr)
        exit_code = EXIT_DOMAIN
    except InvariantViolation as exc:
        print(f"[invariant violation] {exc}", file=sys.stderr)
        exit_code = EXIT_INVARIANT
    _cli_log.info("%s finished with exit code %d in %.3f s", command, exit_code, time() - start)
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
