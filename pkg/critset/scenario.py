"""
Scenario files

A scenario is one JSON document describing a single run:

    {
      "map": {"family": "henon", "a": 6.0, "b": 0.3},
      "experiment": "Scan",
      "params": {"samples": {"kind": "grid", "n": 200, "region": [[-4, 4], [-4, 4]]}, "window": 20},
      "output": {"directory": "runs/scan", "formats": ["csv", "json"]},
      "seed": 0,
      "threads": "auto"
    }

Everything is validated before any computation starts; unknown keys are
rejected with a message naming the offending key.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from critset import config, dynamics, geometry
from critset.errors import CritsetError, ScenarioError

logger = logging.getLogger(__name__)

REQUIRED = object()
TOP_LEVEL_KEYS = {"map", "experiment", "params", "output", "seed", "threads"}
OUTPUT_KEYS = {"directory", "formats"}
FORMATS = ("csv", "json", "png")
SAMPLE_KINDS = {
    "points": {"points": REQUIRED},
    "grid": {"region": None, "n": REQUIRED, "survive": None},
    "random": {"region": None, "count": REQUIRED, "survive": None},
    "attractor": {"start": REQUIRED, "count": REQUIRED, "burn_in": 1000, "stride": 1},
    "periodic": {"max_period": REQUIRED, "region": None, "grid": 21},
}


class Experiment(Enum):
    SCORE = "Score"
    SCAN = "Scan"
    FAR_FROM_HOMOTHETY = "FarFromHomothety"
    DOMINATION = "Domination"
    MANIFOLDS = "Manifolds"
    FIRST_TANGENCY = "FirstTangency"
    PLISS = "Pliss"
    PERIODIC = "Periodic"


PARAMS = {
    Experiment.SCORE: {"samples": REQUIRED, "window": REQUIRED, "grid": 720, "refine_tol": 1e-6},
    Experiment.SCAN: {
        "samples": REQUIRED,
        "window": REQUIRED,
        "threshold": -0.1,
        "grid": 720,
        "refine_tol": 1e-6,
        "misiurewicz_radius": None,
        "misiurewicz_horizon": 50,
    },
    Experiment.FAR_FROM_HOMOTHETY: {"samples": REQUIRED, "delta": REQUIRED, "horizon": REQUIRED, "grid": 720},
    Experiment.DOMINATION: {
        "samples": REQUIRED,
        "window": REQUIRED,
        "delta": REQUIRED,
        "m_horizon": 0,
        "transport_horizon": 20,
        "cone_half_width": None,
        "cone_steps": 1,
    },
    Experiment.MANIFOLDS: {
        "saddle": REQUIRED,
        "period": 1,
        "branches": [["Unstable", "Plus"], ["Unstable", "Minus"], ["Stable", "Plus"], ["Stable", "Minus"]],
        "budget": REQUIRED,
        "curvature_tol": 0.2,
        "intersections": True,
        "band": None,
    },
    Experiment.FIRST_TANGENCY: {"a_range": REQUIRED, "budgets": [50.0, 50.0], "tol": 1e-6},
    Experiment.PLISS: {"sequence": REQUIRED, "gamma0": REQUIRED, "gamma1": REQUIRED, "bound_a": None},
    Experiment.PERIODIC: {"period": REQUIRED, "region": None, "grid": 21},
}


@dataclass
class Scenario:
    map_spec: dict
    map_def: dynamics.MapDef
    experiment: Experiment
    params: dict
    output_directory: Path
    formats: tuple
    seed: int
    threads: int
    digest: str


def _fail(message):
    raise ScenarioError(message)


def _check_keys(table, allowed, where):
    if not isinstance(table, dict):
        _fail(f"{where} must be an object")
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        _fail(f"unknown key{'s' if len(unknown) > 1 else ''} in {where}: {', '.join(unknown)}")


def _with_defaults(table, schema, where):
    _check_keys(table, schema, where)
    merged = {}
    for key, default in schema.items():
        if key in table:
            merged[key] = table[key]
        elif default is REQUIRED:
            _fail(f"{where} is missing required key '{key}'")
        else:
            merged[key] = default
    return merged


def build_map(spec, where="map"):
    """MapDef from its JSON description."""
    if not isinstance(spec, dict) or "family" not in spec:
        _fail(f"{where} must be an object with a 'family'")
    family = str(spec["family"]).lower()
    escape = spec.get("escape_radius", config.ESCAPE_RADIUS)
    try:
        if family == "henon":
            _check_keys(spec, {"family", "a", "b", "escape_radius"}, where)
            return dynamics.MapDef.henon(float(spec["a"]), float(spec["b"]), escape)
        if family == "linear":
            _check_keys(spec, {"family", "matrix", "escape_radius"}, where)
            return dynamics.MapDef.linear(geometry.as_matrix(spec["matrix"]), escape)
        if family == "composed":
            _check_keys(spec, {"family", "maps", "escape_radius"}, where)
            maps = [build_map(m, f"{where}.maps[{i}]") for i, m in enumerate(spec["maps"])]
            if not maps:
                _fail(f"{where}.maps must not be empty")
            return dynamics.MapDef.composed(maps, escape)
    except KeyError as exc:
        _fail(f"{where} is missing required key {exc}")
    except ScenarioError:
        raise
    except (CritsetError, ValueError, TypeError) as exc:
        _fail(f"{where}: {exc}")
    _fail(f"{where}: unknown family '{spec['family']}'")


def _check_samples(spec):
    if not isinstance(spec, dict) or "kind" not in spec:
        _fail("params.samples must be an object with a 'kind'")
    kind = spec["kind"]
    if kind not in SAMPLE_KINDS:
        _fail(f"params.samples: unknown kind '{kind}' (expected one of {', '.join(SAMPLE_KINDS)})")
    body = {k: v for k, v in spec.items() if k != "kind"}
    merged = _with_defaults(body, SAMPLE_KINDS[kind], f"params.samples ({kind})")
    if merged.get("region") is not None:
        merged["region"] = _check_region(merged["region"], "params.samples.region")
    return {"kind": kind, **merged}


def _check_region(region, where):
    try:
        (x0, x1), (y0, y1) = region
        box = dynamics.Box(float(x0), float(x1), float(y0), float(y1))
    except (TypeError, ValueError):
        _fail(f"{where} must be [[xmin, xmax], [ymin, ymax]]")
    if not (box.xmin < box.xmax and box.ymin < box.ymax):
        _fail(f"{where} must have xmin < xmax and ymin < ymax")
    return box


def _check_params(experiment, params):
    merged = _with_defaults(params, PARAMS[experiment], "params")
    if "samples" in merged:
        merged["samples"] = _check_samples(merged["samples"])
    for key in ("window", "horizon", "period", "m_horizon"):
        if key in merged and (not isinstance(merged[key], int) or merged[key] < (0 if key == "m_horizon" else 1)):
            _fail(f"params.{key} must be a positive integer")
    if experiment is Experiment.FIRST_TANGENCY:
        try:
            lo, hi = map(float, merged["a_range"])
        except (TypeError, ValueError):
            _fail("params.a_range must be a pair of numbers")
        if not lo < hi:
            _fail("params.a_range must satisfy a_lo < a_hi")
    if experiment is Experiment.MANIFOLDS:
        for pair in merged["branches"]:
            if len(pair) != 2 or pair[0] not in ("Stable", "Unstable") or pair[1] not in ("Plus", "Minus"):
                _fail(f"params.branches: invalid branch {pair}")
    if merged.get("region") is not None:
        merged["region"] = _check_region(merged["region"], "params.region")
    if experiment is Experiment.FAR_FROM_HOMOTHETY and not 0.0 < merged["delta"] < 1.0:
        _fail("params.delta must lie in (0, 1)")
    if experiment is Experiment.PLISS and not 0.0 < merged["gamma0"] < merged["gamma1"]:
        _fail("params must satisfy 0 < gamma0 < gamma1")
    return merged


def _tangency_map(spec, params):
    """The Hénon member at the top of a_range; the bisection owns a."""
    if not isinstance(spec, dict) or str(spec.get("family", "")).lower() != "henon":
        _fail("FirstTangency requires the henon family")
    if "a" in spec:
        _fail("map.a is not used by FirstTangency (a comes from params.a_range); remove it")
    return {**spec, "a": float(params["a_range"][1])}


def digest(data):
    """sha256 of the canonical JSON form of a scenario."""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def parse_scenario(data, base_dir=Path(".")):
    """
    Validate a scenario document.

    Args:
        data: Parsed JSON object
        base_dir: Directory relative output paths are resolved against

    Returns:
        Scenario

    Raises:
        ScenarioError: naming the first violated rule
    """
    _check_keys(data, TOP_LEVEL_KEYS, "scenario")
    for key in ("map", "experiment"):
        if key not in data:
            _fail(f"scenario is missing required key '{key}'")
    try:
        experiment = Experiment(data["experiment"])
    except ValueError:
        _fail(f"unknown experiment '{data['experiment']}' (expected one of {', '.join(e.value for e in Experiment)})")
    # params first: FirstTangency builds its map from a_range
    params = _check_params(experiment, data.get("params", {}))
    if experiment is Experiment.FIRST_TANGENCY:
        map_def = build_map(_tangency_map(data["map"], params))
    else:
        map_def = build_map(data["map"])

    output = data.get("output", {})
    _check_keys(output, OUTPUT_KEYS, "output")
    formats = tuple(output.get("formats", ["csv", "json"]))
    bad = [f for f in formats if f not in FORMATS]
    if bad:
        _fail(f"output.formats: unknown format {bad[0]}")
    directory = Path(output.get("directory", "critset-output"))
    if not directory.is_absolute():
        directory = base_dir / directory

    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        _fail("seed must be an integer")
    try:
        threads = config.resolve_threads(data.get("threads", 1))
    except ValueError as exc:
        _fail(f"threads: {exc}")

    # the digest covers the document as written, defaults excluded

    return Scenario(
        map_spec=data["map"],
        map_def=map_def,
        experiment=experiment,
        params=params,
        output_directory=directory,
        formats=formats,
        seed=seed,
        threads=threads,
        digest=digest(data),
    )


def load_scenario(path):
    """Read and validate a scenario file; relative output paths follow the file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        _fail(f"cannot read {path}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        _fail(f"{path} is not valid JSON: {exc.msg} (line {exc.lineno})")
    scenario = parse_scenario(data, path.parent)
    logger.info("loaded %s scenario from %s", scenario.experiment.value, path)
    return scenario
