"""
Report serialization

CSV tables, JSON mirrors of report objects and the run manifest. Numbers
are written in their shortest round-trip form and columns in a fixed order,
so identical runs give byte-identical CSV and JSON bodies; only the
manifest carries timestamps and timings.
"""

import csv
import json
import logging
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values for {len(self.columns)} columns")
        self.rows.append(values)


def format_value(value):
    """Shortest round-trip text of a CSV cell."""
    if value is None:
        return ""
    # bool before int, since True is an int
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


def write_csv(path, table):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([format_value(v) for v in row])


def to_jsonable(obj):
    """Plain JSON data from report objects, arrays and enums; non-finite floats become null."""
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(to_jsonable(obj), f, indent=2, allow_nan=False)
        f.write("\n")


class Stopwatch:
    """Wall time per named stage."""

    def __init__(self):
        self.stages = {}
        self.started = time.perf_counter()

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] = self.stages.get(name, 0.0) + time.perf_counter() - t0
            logger.debug("stage %s took %.3f s", name, self.stages[name])

    @property
    def wall_time(self):
        return time.perf_counter() - self.started


class WarningCollector(logging.Handler):
    """Keeps the WARNING-and-above messages logged by critset during a run."""

    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.messages = []

    def emit(self, record):
        self.messages.append(f"{record.name}: {record.getMessage()}")

    @contextmanager
    def attached(self, logger_name="critset"):
        target = logging.getLogger(logger_name)
        target.addHandler(self)
        try:
            yield self
        finally:
            target.removeHandler(self)


@dataclass
class RunManifest:
    status: str
    experiment: str
    scenario_digest: str
    version: str
    seed: int
    threads: int
    started_at: str
    wall_time: float
    stages: dict
    warnings: list
    outputs: list
    error: str | None = None

    def to_dict(self):
        return {
            "status": self.status,
            "experiment": self.experiment,
            "scenario_digest": self.scenario_digest,
            "version": self.version,
            "seed": self.seed,
            "threads": self.threads,
            "started_at": self.started_at,
            "wall_time": self.wall_time,
            "stages": dict(self.stages),
            "warnings": list(self.warnings),
            "outputs": list(self.outputs),
            "error": self.error,
        }


def utc_now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_outputs(directory, result, formats):
    """
    Write tables, reports and figures of an experiment result into `directory`.

    Returns:
        Sorted list of written file names
    """
    directory = Path(directory)
    written = []
    if "csv" in formats:
        for name, table in result.tables.items():
            write_csv(directory / f"{name}.csv", table)
            written.append(f"{name}.csv")
    if "json" in formats:
        for name, report in result.reports.items():
            write_json(directory / f"{name}.json", report)
            written.append(f"{name}.json")
    if "png" in formats and result.figures:
        from critset import plotting

        for name, build in result.figures.items():
            plotting.save(build(), directory / f"{name}.png")
            written.append(f"{name}.png")
    return sorted(written)
