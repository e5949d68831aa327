"""
Packaged steady configurations and loading of user configuration files.

A configuration file is a JSON object with the keys ``gammas``, ``centers``
(list of ``[re, im]`` pairs), ``c``, ``omega``, an optional ``split`` object
and an optional ``scenario`` kind used by the hollow-vortex commands.
"""

import json
import logging
from pathlib import Path

from vortexforge.desingularize import Scenario, ScenarioKind
from vortexforge.exceptions import InputError
from vortexforge.pointvortex import VortexConfiguration

logger = logging.getLogger(__name__)

INDEX_FILE = Path(__file__).parent / "configurations" / "index.json"

if not INDEX_FILE.exists():
    raise ValueError(
        "Cannot find the index file for the packaged configurations. "
        "Please make sure that the index file and the "
        "JSON files with the configurations exist in the configurations folder."
    )

with open(INDEX_FILE, "r", encoding="utf-8") as fl:
    index = json.load(fl)


def available() -> list[str]:
    """Names of the packaged configurations"""
    return sorted(index)


def _read(source: str | Path) -> dict:
    if isinstance(source, str) and source in index:
        path = INDEX_FILE.parent / index[source]
    else:
        path = Path(source)
    if not path.exists():
        raise InputError(f"Configuration {source} is neither a packaged name ({available()}) nor an existing file")
    try:
        with open(path, "r", encoding="utf-8") as fl:
            data = json.load(fl)
    except json.JSONDecodeError as exc:
        raise InputError(f"File {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"File {path} must hold a JSON object, got {type(data).__name__}")
    logger.debug("Read configuration %s from %s", source, path)
    return data


def load_builtin(name: str) -> VortexConfiguration:
    """Packaged configuration by name

    :param name: One of :func:`available`.

    :return: The :class:`VortexConfiguration`, split included.
    """
    if name not in index:
        raise InputError(f"Unknown packaged configuration {name}; available are {available()}")
    return VortexConfiguration.from_dict(_read(name))


def load_configuration(source: str | Path) -> VortexConfiguration:
    """Configuration from a packaged name or a JSON file path"""
    return VortexConfiguration.from_dict(_read(source))


def scenario_from_dict(data: dict) -> Scenario:
    """Scenario of a configuration object; ``general`` when no ``scenario`` key is given"""
    try:
        kind = ScenarioKind(data.get("scenario", ScenarioKind.GENERAL.value))
    except ValueError as exc:
        valid = [kind.value for kind in ScenarioKind]
        raise InputError(f"Unknown scenario {data.get('scenario')!r}; valid kinds are {valid}") from exc
    return Scenario.build(kind, VortexConfiguration.from_dict(data))


def load_scenario(source: str | Path | dict) -> Scenario:
    """Scenario from a packaged name, a file path or an inline configuration object"""
    if isinstance(source, dict):
        return scenario_from_dict(source)
    return scenario_from_dict(_read(source))
