"""API module."""

import logging
from pathlib import Path

import numpy as np

from vortexforge.configurations import load_configuration, load_scenario
from vortexforge.desingularize import (
    BranchPoint,
    BranchResult,
    NewtonSettings,
    ScenarioKind,
    TerminationReason,
    continue_branch,
    leading_guess,
    newton_solve,
)
from vortexforge.diagnostics import DiagnosticsReport, GateTolerances, diagnose
from vortexforge.exceptions import InputError, InvariantViolation
from vortexforge.persistence import (
    BranchWriter,
    RunConfig,
    branch_header,
    dumps,
    export_boundaries,
    export_branch_table,
    read_branch,
)
from vortexforge.pointvortex import (
    VortexConfiguration,
    check_pv_identities,
    classify_nondegeneracy,
    eval_pv_residual,
    is_steady,
    solve_steady_pv,
    steady_kind,
)

logger = logging.getLogger(__name__)


def check_configuration(source: str | Path, classify: bool = True) -> dict:
    """
    Evaluate the steady residual of a configuration and, when it is steady, classify it

    :param source: Packaged configuration name or path to a configuration file

    :param classify: Classify the split attached to the configuration

    :return: Dictionary with the residual, the identity defects and the classification
    """

    cfg = load_configuration(source)
    residual = eval_pv_residual(cfg)
    translation, rotation = check_pv_identities(cfg)
    summary = {
        "residual": [[float(v.real), float(v.imag)] for v in residual],
        "max_residual": float(np.max(np.abs(residual))),
        "steady": is_steady(cfg),
        "identity_defects": [abs(translation), abs(rotation)],
        "classification": None,
    }
    if summary["steady"]:
        summary["kind"] = steady_kind(cfg).value
        if classify and cfg.split is not None:
            summary["classification"] = classify_nondegeneracy(cfg).to_dict()
    return summary


def solve_configuration(source: str | Path, output_path: str | Path | None = None) -> VortexConfiguration:
    """
    Solve for the varying coordinates of a configuration, starting from the given values

    :param source: Packaged configuration name or path to a configuration file with a split

    :param output_path: Optional path of the JSON file receiving the solved configuration

    :return: The steady configuration
    """

    cfg = solve_steady_pv(load_configuration(source))
    if output_path is not None:
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, "w", encoding="utf-8") as fl:
            fl.write(dumps(cfg.to_dict()) + "\n")
        logger.info("Solved configuration written to %s", output_path)
    return cfg


def desingularize(
    source: str | Path | dict,
    rho: float,
    N: int = 64,
    n_nodes: int = 0,
    settings: NewtonSettings | None = None,
    tolerances: GateTolerances | None = None,
    output_path: str | Path | None = None,
) -> BranchPoint:
    """
    Solve the hollow-vortex problem of a scenario at a single radius

    :param source: Packaged configuration name, path to a configuration file or inline object

    :param rho: Radius of the hollow vortices

    :param N: Truncation

    :param n_nodes: Quadrature size, ``4N`` by default

    :param output_path: Optional branch file receiving the point; a point failing a gate is stored with ``accepted`` false

    :return: The converged :class:`BranchPoint`; raises :class:`InvariantViolation` if it fails a gate
    """

    if output_path is not None and Path(output_path).exists() and Path(output_path).stat().st_size > 0:
        raise InputError(f"{output_path} already exists")
    scenario = load_scenario(source)
    guess = leading_guess(scenario, rho, N, n_nodes)
    u = newton_solve(guess, scenario, settings)
    report = diagnose(u, compute_L=scenario.kind is ScenarioKind.ROTATING_PAIR)
    failures = report.gate_failures(tolerances)
    point = BranchPoint(u, report, 0.0, accepted=not failures)
    if output_path is not None:
        with BranchWriter(output_path, branch_header(None, scenario)) as writer:
            writer.write_point(point)
    if failures:
        raise InvariantViolation(f"The solution at ρ={rho} fails the gates {failures}")
    return point


def continue_branch_to_file(
    run_config: RunConfig | None, output_path: str | Path, resume: bool = False
) -> BranchResult:
    """
    Follow a branch and stream every accepted point to a JSON-lines file

    :param run_config: Run settings; ignored when resuming, the stored ones are used

    :param output_path: Path to the branch file

    :param resume: Continue the run stored in ``output_path``

    :return: The :class:`BranchResult`, points of the earlier run included
    """

    output_path = Path(output_path)
    header, history = None, None
    if resume:
        branch = read_branch(output_path, repair=True)
        if branch.run_config is None:
            raise InputError(f"{output_path} does not hold a continuation run")
        if branch.finished:
            logger.info("%s is already terminated (%s)", output_path, branch.termination["reason"])
            return BranchResult(
                branch.points,
                TerminationReason(branch.termination["reason"]),
                list(branch.termination.get("fired", [])),
                branch.termination.get("note", ""),
            )
        if run_config is not None and run_config.to_dict() != branch.run_config.to_dict():
            logger.warning("Resuming %s with its stored run configuration", output_path)
        run_config, scenario, history = branch.run_config, branch.scenario, branch.points
    else:
        if run_config is None:
            raise InputError("A run configuration is needed to start a branch")
        if output_path.exists() and output_path.stat().st_size > 0:
            raise InputError(f"{output_path} already exists; resume it or choose another path")
        scenario = run_config.load_scenario()
        header = branch_header(run_config, scenario)

    with BranchWriter(output_path, header) as writer:
        result = continue_branch(
            scenario,
            run_config.rho_start,
            run_config.rho_max,
            step=run_config.step,
            max_steps=run_config.max_steps,
            N=run_config.N,
            n_nodes=run_config.n_nodes,
            settings=run_config.newton,
            thresholds=run_config.thresholds,
            tolerances=run_config.gates,
            history=history,
            on_point=writer.write_point,
        )
        writer.write_termination(result)
    return result


def diagnose_state(input_path: str | Path, index: int = -1, compute_momentum: bool = False) -> DiagnosticsReport:
    """
    Recompute the diagnostics of a stored branch point

    :param input_path: Path to the branch file

    :param index: Position of the point in the file, the last one by default

    :param compute_momentum: Also evaluate the momentum identity (rotating states only)

    :return: The :class:`DiagnosticsReport`
    """

    branch = read_branch(input_path)
    if not branch.points:
        raise InputError(f"{input_path} holds no branch point")
    try:
        point = branch.points[index]
    except IndexError as exc:
        raise InputError(f"{input_path} has {len(branch.points)} points, no index {index}") from exc
    if not point.accepted:
        logger.warning("Point %d of %s was not accepted", index, input_path)
    rotating = branch.scenario.kind is ScenarioKind.ROTATING_PAIR
    return diagnose(point.state, compute_L=rotating, compute_momentum=compute_momentum)


def export_branch(input_path: str | Path, output_dir: str | Path | None = None) -> tuple:
    """
    Export the boundary curves and the scalar monitors of a branch file to CSV

    :param input_path: Path to the branch file

    :param output_dir: Directory of the CSV files, the one of the branch file by default

    :return: The boundary and branch tables
    """

    input_path = Path(input_path)
    branch = read_branch(input_path)
    output_dir = Path(output_dir) if output_dir is not None else input_path.parent
    output_dir.mkdir(parents=True, exist_ok=True)
    boundaries = export_boundaries(
        [point.state for point in branch.points], output_dir / f"{input_path.stem}_boundaries.csv"
    )
    table = export_branch_table(branch.points, output_dir / f"{input_path.stem}_branch.csv")
    return boundaries, table
