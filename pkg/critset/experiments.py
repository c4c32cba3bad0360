"""
Experiments

One runner per experiment kind. A runner turns a validated Scenario into
an ExperimentResult: CSV tables, JSON-able reports and figure builders.
`run_scenario` wraps a runner with staging, the manifest and exit codes.
"""

import logging
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from critset import __version__, cocycle, criticality, domination, dynamics, manifolds
from critset.errors import CritsetError, Escaped, NoUsableSamples, NotASaddle, ScenarioError, Undetermined
from critset.report import RunManifest, Stopwatch, Table, WarningCollector, utc_now, write_json, write_outputs
from critset.scenario import Experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

SCORE_COLUMNS = ["x", "y", "score", "theta_best", "fwd_score", "bwd_score"]


@dataclass
class ExperimentResult:
    tables: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)
    figures: dict = field(default_factory=dict)


def build_samples(scenario, spec, window=0):
    """
    Orbit sources described by a samples spec.

    Grid and random samples keep only points surviving `survive` steps both
    ways (default: the experiment window); periodic samples are replayed
    exactly along their cycles.
    """
    map_def = scenario.map_def
    kind = spec["kind"]
    region = spec.get("region") or dynamics.trapping_box(map_def)
    if kind == "points":
        return [np.asarray(p, dtype=float) for p in spec["points"]]
    if kind == "grid":
        survive = window if spec["survive"] is None else spec["survive"]
        return dynamics.grid_samples(map_def, region, spec["n"], survive)
    if kind == "random":
        rng = np.random.default_rng(scenario.seed)
        P = rng.uniform([region.xmin, region.ymin], [region.xmax, region.ymax], size=(spec["count"], 2))
        survive = window if spec["survive"] is None else spec["survive"]
        return dynamics.surviving(map_def, P, survive)
    if kind == "attractor":
        return dynamics.attractor_samples(map_def, spec["start"], spec["count"], spec["burn_in"], spec["stride"])
    return dynamics.periodic_samples(map_def, spec["max_period"], spec.get("region"), spec["grid"], scenario.threads)


def _score_row(report):
    return (
        report.base[0],
        report.base[1],
        report.score,
        report.best_direction,
        report.forward_score,
        report.backward_score,
    )


def _require_samples(samples, usable):
    if samples and not usable:
        raise NoUsableSamples(f"all {len(samples)} samples escaped or were degenerate")


def run_score(scenario, clock):
    p = scenario.params
    with clock.stage("samples"):
        samples = build_samples(scenario, p["samples"])
    table = Table(SCORE_COLUMNS)
    reports = []
    with clock.stage("score"):
        for sample in samples:
            try:
                report = criticality.criticality_score(
                    scenario.map_def, sample, p["window"], grid=p["grid"], refine_tol=p["refine_tol"]
                )
            except Escaped as exc:
                logger.warning("sample %s escaped at step %d", dynamics.base_point(sample).tolist(), exc.index)
                continue
            table.add(*_score_row(report))
            reports.append(report)
    _require_samples(samples, reports)
    result = ExperimentResult(tables={"scores": table}, reports={"scores": reports})
    if reports:
        result.figures["profile"] = lambda: _plotting().score_profile(reports[0])
    return result


def run_scan(scenario, clock):
    p = scenario.params
    with clock.stage("samples"):
        samples = build_samples(scenario, p["samples"], p["window"])
    if not samples:
        logger.warning("no samples survive the window")
    with clock.stage("scan"):
        scan = criticality.scan(
            scenario.map_def,
            samples,
            p["window"],
            threshold=p["threshold"],
            grid=p["grid"],
            refine_tol=p["refine_tol"],
            threads=scenario.threads,
        )
    _require_samples(samples, [r for r in scan.reports if r is not None])

    table = Table(SCORE_COLUMNS)
    for c in scan.candidates:
        table.add(*_score_row(c.report))
    result = ExperimentResult(tables={"scan": table}, reports={"scan": scan})

    if p["misiurewicz_radius"] is not None:
        with clock.stage("misiurewicz"):
            verdicts = criticality.misiurewicz_check(
                scenario.map_def, scan.candidates, p["misiurewicz_radius"], p["misiurewicz_horizon"]
            )
        result.reports["misiurewicz"] = verdicts

    scored = [r for r in scan.reports if r is not None]
    result.figures["scan"] = lambda: _plotting().scan_scores(
        [r.base for r in scored], [r.score for r in scored], p["threshold"], scan.candidates
    )
    return result


def run_far_from_homothety(scenario, clock):
    p = scenario.params
    with clock.stage("samples"):
        samples = build_samples(scenario, p["samples"], p["horizon"])
    table = Table(["x", "y", "verdict", "witness_direction", "margin"])
    reports = []
    with clock.stage("homothety"):
        for sample in samples:
            try:
                r = criticality.far_from_homotheties(scenario.map_def, sample, p["delta"], p["horizon"], grid=p["grid"])
            except Escaped as exc:
                logger.warning("sample %s escaped at step %d", dynamics.base_point(sample).tolist(), exc.index)
                continue
            table.add(r.base[0], r.base[1], r.verdict, r.witness_direction, r.margin)
            reports.append(r)
    _require_samples(samples, reports)
    return ExperimentResult(tables={"homothety": table}, reports={"homothety": reports})


def run_domination(scenario, clock):
    p = scenario.params
    with clock.stage("samples"):
        samples = build_samples(scenario, p["samples"], max(p["transport_horizon"], p["m_horizon"] + p["window"]))
    with clock.stage("condition_star"):
        report = domination.condition_star(
            scenario.map_def,
            samples,
            p["window"],
            p["delta"],
            p["m_horizon"],
            transport_horizon=p["transport_horizon"],
            threads=scenario.threads,
        )
    if samples and len(report.violations) == len(samples) and all(v.m is None for v in report.violations):
        raise NoUsableSamples("no sample has a resolvable splitting")

    table = Table(["x", "y", "m", "value", "tag"])
    for v in report.violations:
        table.add(v.point[0], v.point[1], v.m, v.value, v.tag)
    result = ExperimentResult(tables={"violations": table}, reports={"domination": report})

    if p["cone_half_width"] is not None:
        with clock.stage("cone_field"):
            cone = domination.splitting_cone_field(
                scenario.map_def, samples, p["cone_half_width"], transport_horizon=p["transport_horizon"]
            )
            result.reports["cone_field"] = domination.verify_cone_field(
                scenario.map_def, samples, cone, steps=p["cone_steps"]
            )
    return result


def locate_saddle(map_def, near, period):
    """The periodic point of the given period closest to `near`."""
    near = np.asarray(near, dtype=float)
    box = dynamics.Box(near[0] - 0.1, near[0] + 0.1, near[1] - 0.1, near[1] + 0.1)
    members = [m for pp in dynamics.find_periodic_points(map_def, period, box, 5) if pp.period == period for m in pp.members()]
    if not members:
        raise NotASaddle(f"no period-{period} point near {near.tolist()}")
    return min(members, key=lambda m: float(np.linalg.norm(m.location - near)))


def run_manifolds(scenario, clock):
    p = scenario.params
    map_def = scenario.map_def
    with clock.stage("saddle"):
        saddle = locate_saddle(map_def, p["saddle"], p["period"])
    with clock.stage("growth"):
        grown = [
            manifolds.grow_branch(map_def, saddle, kind, side, p["budget"], curvature_tol=p["curvature_tol"])
            for kind, side in p["branches"]
        ]

    vertices = Table(["kind", "side", "index", "x", "y", "param"])
    for br in grown:
        for i, (pt, s) in enumerate(zip(br.polyline, br.params)):
            vertices.add(br.kind, br.side, i, pt[0], pt[1], s)
    result = ExperimentResult(
        tables={"branches": vertices},
        reports={"saddle": saddle, "branches": grown},
    )

    events = []
    if p["intersections"]:
        crossings = Table(["unstable_side", "stable_side", "x", "y", "angle", "crossing"])
        with clock.stage("intersections"):
            for u in (b for b in grown if b.kind is manifolds.BranchKind.UNSTABLE):
                for s in (b for b in grown if b.kind is manifolds.BranchKind.STABLE):
                    for e in manifolds.find_intersections(u, s):
                        kind = None
                        if p["band"] is not None:
                            try:
                                kind = manifolds.classify_crossing(s, u, e, p["band"])
                            except Undetermined as exc:
                                logger.warning("crossing at %s undetermined: %s", e.point.tolist(), exc)
                        crossings.add(u.side, s.side, e.point[0], e.point[1], e.angle, kind)
                        events.append(e)
        result.tables["intersections"] = crossings
        result.reports["intersections"] = events
    result.figures["branches"] = lambda: _plotting().branches(grown, events, saddle.location)
    return result


def run_first_tangency(scenario, clock):
    p = scenario.params
    with clock.stage("bisection"):
        report = manifolds.first_tangency(
            scenario.map_def.family.b,
            tuple(p["a_range"]),
            budgets=tuple(p["budgets"]),
            tol=p["tol"],
            threads=scenario.threads,
        )
    table = Table(["n", "score"])
    for n, s in report.iterate_scores:
        table.add(n, s)
    result = ExperimentResult(tables={"iterate_scores": table}, reports={"first_tangency": report})
    result.figures["iterate_scores"] = lambda: _plotting().iterate_scores(report.iterate_scores, report.critical_iterate)
    return result


def run_pliss(scenario, clock):
    p = scenario.params
    with clock.stage("pliss"):
        times = cocycle.pliss_times(p["sequence"], p["gamma0"], p["gamma1"], p["bound_a"])
    table = Table(["t"])
    for t in times.times:
        table.add(t)
    bound = cocycle.pliss_density_bound(times.gamma0, times.gamma1, times.bound_a)
    n = len(p["sequence"])
    result = ExperimentResult(
        tables={"pliss_times": table},
        reports={
            "pliss": times,
            "pliss_bound": {"density_bound": bound, "length": n, "bound_met": times.density * n >= bound * n - 1},
        },
    )
    result.figures["pliss"] = lambda: _plotting().pliss(np.asarray(p["sequence"], dtype=float), times.gamma1, times.times)
    return result


def run_periodic(scenario, clock):
    p = scenario.params
    region = p["region"] or dynamics.trapping_box(scenario.map_def)
    with clock.stage("newton"):
        found = dynamics.find_periodic_points(scenario.map_def, p["period"], region, p["grid"], scenario.threads)
    table = Table(["x", "y", "period", "class", "modulus_1", "modulus_2"])
    for pp in found:
        moduli = sorted((abs(z) for z in pp.eigenvalues), reverse=True)
        table.add(pp.location[0], pp.location[1], pp.period, pp.linear_class, moduli[0], moduli[1])
    return ExperimentResult(tables={"periodic": table}, reports={"periodic": found})


RUNNERS = {
    Experiment.SCORE: run_score,
    Experiment.SCAN: run_scan,
    Experiment.FAR_FROM_HOMOTHETY: run_far_from_homothety,
    Experiment.DOMINATION: run_domination,
    Experiment.MANIFOLDS: run_manifolds,
    Experiment.FIRST_TANGENCY: run_first_tangency,
    Experiment.PLISS: run_pliss,
    Experiment.PERIODIC: run_periodic,
}


def _plotting():
    from critset import plotting

    return plotting


def run_experiment(scenario, clock=None):
    return RUNNERS[scenario.experiment](scenario, clock or Stopwatch())


def _exit_code(exc):
    return EXIT_INVALID if isinstance(exc, ScenarioError) else EXIT_NUMERICAL


def run_scenario(scenario):
    """
    Run a scenario and write its outputs.

    Files are written to a staging directory next to the output directory
    and moved into place only when the whole run succeeded; a failed run
    leaves just the manifest, with its error.

    Returns:
        Exit code: 0 success, 2 invalid input, 3 numerical failure
    """
    clock = Stopwatch()
    started = utc_now()
    collector = WarningCollector()
    out = Path(scenario.output_directory)
    out.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".critset-", dir=out.parent))

    status, error, code, written = "ok", None, EXIT_OK, []
    try:
        with collector.attached():
            with clock.stage("compute"):
                result = run_experiment(scenario, clock)
            with clock.stage("write"):
                written = write_outputs(staging, result, scenario.formats)
    except CritsetError as exc:
        status, error, code, written = "failed", f"{type(exc).__name__}: {exc}", _exit_code(exc), []
        logger.error("%s run failed: %s", scenario.experiment.value, error)
    except ValueError as exc:
        status, error, code, written = "failed", f"{type(exc).__name__}: {exc}", EXIT_INVALID, []
        logger.error("%s run failed: %s", scenario.experiment.value, error)
    except Exception as exc:
        status, error, code, written = "failed", f"{type(exc).__name__}: {exc}", EXIT_NUMERICAL, []
        logger.exception("%s run failed unexpectedly", scenario.experiment.value)

    moved = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name in written:
            (staging / name).replace(out / name)
            moved.append(name)
    except OSError as exc:
        # a half-moved run is a failed run
        for name in moved:
            (out / name).unlink(missing_ok=True)
        status, error, code, written = "failed", f"{type(exc).__name__}: {exc}", EXIT_NUMERICAL, []
        logger.error("%s run failed: %s", scenario.experiment.value, error)
    finally:
        shutil.rmtree(staging, ignore_errors=True)

    manifest = RunManifest(
        status=status,
        experiment=scenario.experiment.value,
        scenario_digest=scenario.digest,
        version=__version__,
        seed=scenario.seed,
        threads=scenario.threads,
        started_at=started,
        wall_time=clock.wall_time,
        stages=dict(clock.stages),
        warnings=collector.messages,
        outputs=written,
        error=error,
    )
    write_json(out / "manifest.json", manifest)
    return code
