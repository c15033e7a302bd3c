"""JSON config documents for the command line.

A config holds ``"schema": 1`` plus any of the sections ``experiment``
(an experiment plan), ``scan`` (a singular step-size scan) and ``traj``
(a single recorded trajectory).  Everything is validated on load, before
any computation or output happens.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .analysis import DEFAULT_GRID, parse_map_kind
from .costs import CostModel
from .errors import ConfigurationError
from .experiments import ExperimentPlan, make_algorithm, resolve_cost
from .optimizers import StopRule

SCHEMA_VERSION = 1
SECTIONS = ("experiment", "scan", "traj")


def dumps(obj) -> str:
    """Canonical JSON text (sorted keys, two-space indent, trailing newline)."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _build_cost(section, where) -> CostModel:
    if not isinstance(section.get("cost"), dict):
        raise ConfigurationError(f"{where}: 'cost' must be an object with a 'name' field")
    return resolve_cost(section["cost"], section.get("manifold"))


def _check_keys(section, allowed, where):
    if not isinstance(section, dict):
        raise ConfigurationError(f"{where} must be an object")
    extra = set(section) - set(allowed)
    if extra:
        raise ConfigurationError(f"{where}: unknown fields {', '.join(sorted(extra))}")


@dataclass
class ScanSpec:
    cost: CostModel
    map_kind: object
    point: np.ndarray
    alpha_max: float
    grid_size: int = DEFAULT_GRID


@dataclass
class TrajSpec:
    cost: CostModel
    algorithm: object
    x0: np.ndarray
    stop: StopRule


def parse_scan(section) -> ScanSpec:
    _check_keys(section, ("cost", "manifold", "map", "point", "alpha_max", "grid_size"), "scan")
    for key in ("cost", "point", "alpha_max"):
        if key not in section:
            raise ConfigurationError(f"scan is missing {key!r}")
    cost = _build_cost(section, "scan")
    point = cost.manifold.validate_point(section["point"])
    alpha_max = float(section["alpha_max"])
    if not alpha_max > 0:
        raise ConfigurationError("scan: alpha_max must be positive")
    grid = int(section.get("grid_size", DEFAULT_GRID))
    if grid < 2:
        raise ConfigurationError("scan: grid_size must be >= 2")
    return ScanSpec(cost, parse_map_kind(section.get("map", "fixed_step")), point, alpha_max, grid)


def parse_traj(section) -> TrajSpec:
    _check_keys(section, ("cost", "manifold", "algorithm", "x0", "stop"), "traj")
    for key in ("cost", "algorithm", "x0"):
        if key not in section:
            raise ConfigurationError(f"traj is missing {key!r}")
    cost = _build_cost(section, "traj")
    alg = make_algorithm(section["algorithm"])
    alg.rule(cost)
    x0 = cost.manifold.validate_point(section["x0"])
    try:
        stop = StopRule(**(section.get("stop") or {}))
    except TypeError as exc:
        raise ConfigurationError(f"traj: {exc}") from None
    return TrajSpec(cost, alg, x0, stop)


def load_config(path) -> dict:
    """Read and validate a config file; returns the raw document."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from None
    return validate_config(doc)


def validate_config(doc) -> dict:
    if not isinstance(doc, dict):
        raise ConfigurationError("config must be a JSON object")
    if doc.get("schema") != SCHEMA_VERSION:
        raise ConfigurationError(f"config must declare \"schema\": {SCHEMA_VERSION}")
    _check_keys(doc, ("schema",) + SECTIONS, "config")
    if "experiment" in doc:
        ExperimentPlan.from_dict(doc["experiment"])
    if "scan" in doc:
        parse_scan(doc["scan"])
    if "traj" in doc:
        parse_traj(doc["traj"])
    return doc

