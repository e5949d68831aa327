"""
Run configuration, JSON-lines branch files and CSV exports.

A branch file starts with a header record holding the :class:`RunConfig`, the scenario
and the package version, followed by one record per :class:`BranchPoint` and, once
the run is over, a termination record. A single-radius solve that fails a gate is stored with
``accepted`` false. Every record is a single line, written and flushed on its own,
so an interrupted run leaves at most one partial line behind.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from vortexforge import __version__
from vortexforge.configurations import load_scenario
from vortexforge.desingularize import (
    BranchPoint,
    BranchResult,
    ContinuationThresholds,
    NewtonSettings,
    Scenario,
)
from vortexforge.diagnostics import GateTolerances, boundary_curves
from vortexforge.exceptions import InputError
from vortexforge.hollowvortex import HollowState, assemble_flow

logger = logging.getLogger(__name__)

HEADER = "header"
POINT = "point"
TERMINATION = "termination"

#: Smallest truncation accepted for a run
MIN_TRUNCATION = 16

CSV_FLOAT_FORMAT = "%.17g"


def _to_builtin(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(record: dict) -> str:
    """One JSON line; floats are written with their shortest exact representation"""
    return json.dumps(record, default=_to_builtin, ensure_ascii=False)


@dataclass
class RunConfig:
    """Settings of a continuation run

    :param scenario: Name of a packaged configuration, path of a configuration file or an inline object.

    :param N: Truncation.

    :param n_nodes: Quadrature size, ``4N`` when 0.

    :param rho_start: Radius of the first point.

    :param rho_max: Radius at which the run stops.

    :param step: Initial step in ρ.

    :param max_steps: Maximum number of accepted points.

    :param seed: Seed of the randomized checks.
    """

    scenario: str | dict = "rotating-pair"
    N: int = 64
    n_nodes: int = 0
    rho_start: float = 0.02
    rho_max: float = 0.5
    step: float = 0.01
    max_steps: int = 50
    newton: NewtonSettings = field(default_factory=NewtonSettings)
    thresholds: ContinuationThresholds = field(default_factory=ContinuationThresholds)
    gates: GateTolerances = field(default_factory=GateTolerances)
    output_dir: Path = Path(".")
    seed: int = 0

    def __post_init__(self):
        self.output_dir = Path(self.output_dir)
        if self.N < MIN_TRUNCATION:
            raise InputError(f"N must be at least {MIN_TRUNCATION}, got {self.N}")
        if self.n_nodes and self.n_nodes < 2 * self.N + 3:
            raise InputError(f"n_nodes={self.n_nodes} cannot resolve N={self.N}")
        if not 0.0 < self.rho_start < self.rho_max:
            raise InputError(f"Expected 0 < rho_start < rho_max, got {self.rho_start}, {self.rho_max}")
        if not self.step > 0.0:
            raise InputError(f"The initial step must be positive, got {self.step}")
        if self.max_steps < 1:
            raise InputError(f"max_steps must be positive, got {self.max_steps}")
        for group in (self.thresholds, self.gates):
            for name, value in group.to_dict().items():
                if not value > 0.0:
                    raise InputError(f"Tolerance {name} must be positive, got {value}")

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "N": self.N,
            "n_nodes": self.n_nodes,
            "rho_start": self.rho_start,
            "rho_max": self.rho_max,
            "step": self.step,
            "max_steps": self.max_steps,
            "newton": self.newton.to_dict(),
            "thresholds": self.thresholds.to_dict(),
            "gates": self.gates.to_dict(),
            "output_dir": str(self.output_dir),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"Unknown run settings {sorted(unknown)}")
        try:
            for name, kind in (("N", int), ("n_nodes", int), ("max_steps", int), ("seed", int)):
                if name in data:
                    data[name] = kind(data[name])
            for name in ("rho_start", "rho_max", "step"):
                if name in data:
                    data[name] = float(data[name])
            data["newton"] = NewtonSettings.from_dict(data.get("newton"))
            data["thresholds"] = ContinuationThresholds.from_dict(data.get("thresholds"))
            data["gates"] = GateTolerances.from_dict(data.get("gates"))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"Malformed run configuration: {exc}") from exc
        return cls(**data)

    @classmethod
    def from_file(cls, input_path: str | Path) -> "RunConfig":
        input_path = Path(input_path)
        if not input_path.exists():
            raise InputError(f"File {input_path} not found")
        try:
            with open(input_path, "r", encoding="utf-8") as fl:
                data = json.load(fl)
        except json.JSONDecodeError as exc:
            raise InputError(f"File {input_path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def load_scenario(self) -> Scenario:
        return load_scenario(self.scenario)


def branch_header(run_config: RunConfig | None, scenario: Scenario) -> dict:
    """Header record; single-point files have no run configuration"""
    return {
        "type": HEADER,
        "version": __version__.version,
        "run_config": None if run_config is None else run_config.to_dict(),
        "scenario": scenario.to_dict(),
    }


class BranchWriter:
    """Appends records to a branch file; the header is written when the file is empty

    :param output_path: Path of the JSON-lines file.

    :param header: Header record, required for a new file.
    """

    def __init__(self, output_path: str | Path, header: dict | None = None):
        self.output_path = Path(output_path)
        self._header = header
        self._fl = None

    def __enter__(self) -> "BranchWriter":
        self.open()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()

    def open(self):
        self.output_path.parent.mkdir(parents=True, exist_ok=True)
        fresh = not self.output_path.exists() or self.output_path.stat().st_size == 0
        if fresh and self._header is None:
            raise InputError(f"A header is needed to start the branch file {self.output_path}")
        self._fl = open(self.output_path, "a", encoding="utf-8")
        if fresh:
            self._write(self._header)
            logger.info("Started branch file %s", self.output_path)

    def close(self):
        if self._fl is not None:
            self._fl.close()
            self._fl = None

    def _write(self, record: dict):
        if self._fl is None:
            raise ValueError("The branch writer is not open")
        self._fl.write(dumps(record) + "\n")
        self._fl.flush()

    def write_point(self, point: BranchPoint):
        self._write({"type": POINT, **point.to_dict()})
        logger.debug("Wrote point at ρ=%.6g to %s", point.state.rho, self.output_path)

    def write_termination(self, result: BranchResult):
        self._write(
            {
                "type": TERMINATION,
                "reason": result.reason.value,
                "fired": list(result.fired),
                "note": result.note,
                "points": len(result.points),
            }
        )
        logger.info("Closed branch file %s: %s", self.output_path, result.reason.value)


@dataclass
class BranchFile:
    """Parsed branch file"""

    header: dict
    points: list
    termination: dict | None = None

    @property
    def run_config(self) -> RunConfig | None:
        if self.header.get("run_config") is None:
            return None
        return RunConfig.from_dict(self.header["run_config"])

    @property
    def scenario(self) -> Scenario:
        return Scenario.from_dict(self.header["scenario"])

    @property
    def finished(self) -> bool:
        return self.termination is not None


def read_branch(input_path: str | Path, repair: bool = False) -> BranchFile:
    """Reads a branch file

    An unterminated last line is ignored (it is the trace of an interrupted write);
    with ``repair`` it is also cut from the file so appending can resume.

    :param input_path: Path of the JSON-lines file.

    :param repair: Truncate the file after the last complete record.

    :return: The :class:`BranchFile`.
    """
    input_path = Path(input_path)
    if not input_path.exists():
        raise InputError(f"File {input_path} not found")
    with open(input_path, "rb") as fl:
        raw = fl.read()
    body, terminator, tail = raw.rpartition(b"\n")
    valid_end = len(body) + len(terminator)
    if tail.strip():
        logger.warning("Ignoring partial last line of %s (%d bytes)", input_path, len(tail))
    records = []
    for number, line in enumerate(body.split(b"\n") if terminator else [], start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line.decode("utf-8")))
        except ValueError as exc:
            raise InputError(f"Corrupt record on line {number} of {input_path}: {exc}") from exc

    if repair and valid_end < len(raw):
        with open(input_path, "r+b") as fl:
            fl.truncate(valid_end)
        logger.info("Truncated %s to %d bytes", input_path, valid_end)

    if not records or records[0].get("type") != HEADER:
        raise InputError(f"Branch file {input_path} has no header")
    header, points, termination = records[0], [], None
    for number, record in enumerate(records[1:], start=2):
        if termination is not None:
            raise InputError(f"Record {number} of {input_path} follows the termination record")
        kind = record.get("type")
        if kind == POINT:
            points.append(BranchPoint.from_dict(record))
        elif kind == TERMINATION:
            termination = record
        else:
            raise InputError(f"Unknown record type {kind!r} in {input_path}")
    arclengths = [point.arclength for point in points]
    if any(b < a for a, b in zip(arclengths, arclengths[1:])):
        raise InputError(f"Arclength is not monotone in {input_path}")
    return BranchFile(header, points, termination)


def boundary_table(states: list) -> pd.DataFrame:
    """Boundary images and speeds |U| of every state, one row per quadrature node"""
    frames = []
    for number, state in enumerate(states):
        theta, points, speed = boundary_curves(assemble_flow(state))
        M, n_nodes = points.shape
        frames.append(
            pd.DataFrame(
                {
                    "point": np.full(M * n_nodes, number),
                    "rho": np.full(M * n_nodes, state.rho),
                    "vortex_index": np.repeat(np.arange(M), n_nodes),
                    "theta": np.tile(theta, M),
                    "re_z": points.real.reshape(-1),
                    "im_z": points.imag.reshape(-1),
                    "speed": speed.reshape(-1),
                }
            )
        )
    if not frames:
        return pd.DataFrame(columns=["point", "rho", "vortex_index", "theta", "re_z", "im_z", "speed"])
    return pd.concat(frames, ignore_index=True)


def export_boundaries(states: list, output_path: str | Path) -> pd.DataFrame:
    """Writes :func:`boundary_table` of ``states`` (a list of :class:`HollowState`) to CSV"""
    table = boundary_table([state for state in states if isinstance(state, HollowState)])
    table.to_csv(output_path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info("Exported %d boundary rows to %s", len(table), output_path)
    return table


def branch_table(points: list) -> pd.DataFrame:
    """Scalar monitors of a branch, one row per stored point"""
    rows = []
    for number, point in enumerate(points):
        state, report = point.state, point.diagnostics
        row = {"point": number, "rho": state.rho, "arclength": point.arclength, "accepted": point.accepted}
        row.update(dict(zip(state.split.varying, state.lam.tolist())))
        row.update({f"Q{k + 1}": float(q) for k, q in enumerate(state.Q)})
        row.update(
            {
                "n_conf": report.n_conf,
                "n_vel": report.n_vel,
                "non_circularity": report.non_circularity,
                "vacuum_area": report.vacuum_area,
                "moment_inertia": report.moment_inertia,
                "excess_L": np.nan if report.excess_L is None else report.excess_L,
                "phi_resid": report.phi_resid,
                "wave_speed_margin": report.wave_speed_margin,
                "gates_ok": report.gates_ok(),
            }
        )
        rows.append(row)
    return pd.DataFrame(rows)


def export_branch_table(points: list, output_path: str | Path) -> pd.DataFrame:
    """Writes :func:`branch_table` to CSV"""
    table = branch_table(points)
    table.to_csv(output_path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info("Exported %d branch rows to %s", len(table), output_path)
    return table
