import json
from pathlib import Path

import pytest

from critset import dynamics
from critset.errors import ScenarioError
from critset.scenario import Experiment, load_scenario, parse_scenario

PLISS = {
    "map": {"family": "henon", "a": 6.0, "b": 0.3},
    "experiment": "Pliss",
    "params": {"sequence": [0.5, 0.5, 0.5, 0.5], "gamma0": 0.8, "gamma1": 0.9},
}


def test_defaults_are_filled_in(tmp_path):
    scenario = parse_scenario(PLISS, tmp_path)
    assert scenario.experiment is Experiment.PLISS
    assert scenario.params["bound_a"] is None
    assert scenario.formats == ("csv", "json")
    assert scenario.output_directory == tmp_path / "critset-output"
    assert scenario.seed == 0
    assert isinstance(scenario.map_def.family, dynamics.Henon)


def test_digest_ignores_key_order():
    reordered = dict(reversed(list(PLISS.items())))
    assert parse_scenario(reordered).digest == parse_scenario(PLISS).digest
    changed = {**PLISS, "seed": 1}
    assert parse_scenario(changed).digest != parse_scenario(PLISS).digest


@pytest.mark.parametrize(
    ("patch", "message"),
    [
        ({"colour": "red"}, "unknown key in scenario: colour"),
        ({"experiment": "Everything"}, "unknown experiment 'Everything'"),
        ({"map": {"family": "henon", "a": 6.0, "b": 0.0}}, "b = 0"),
        ({"map": {"family": "henon", "a": 6.0}}, "missing required key"),
        ({"map": {"family": "logistic"}}, "unknown family"),
        ({"map": {"family": "linear", "matrix": [[1, 2], [2, 4]]}}, "not invertible"),
        ({"params": {"sequence": [0.5], "gamma0": 0.9, "gamma1": 0.8}}, "gamma0 < gamma1"),
        ({"params": {"sequence": [0.5], "gamma0": 0.8}}, "missing required key 'gamma1'"),
        ({"params": {"sequence": [0.5], "gamma0": 0.8, "gamma1": 0.9, "extra": 1}}, "unknown key in params: extra"),
        ({"output": {"formats": ["xml"]}}, "unknown format xml"),
        ({"seed": "zero"}, "seed must be an integer"),
    ],
)
def test_invalid_scenarios_are_rejected(patch, message):
    with pytest.raises(ScenarioError, match=message):
        parse_scenario({**PLISS, **patch})


def test_sample_specs_are_validated():
    scan = {
        "map": {"family": "henon", "a": 6.0, "b": 0.3},
        "experiment": "Scan",
        "params": {"samples": {"kind": "grid", "n": 10, "region": [[-1, 1], [-1, 1]]}, "window": 5},
    }
    scenario = parse_scenario(scan)
    assert scenario.params["samples"]["region"] == dynamics.Box(-1.0, 1.0, -1.0, 1.0)
    assert scenario.params["threshold"] == -0.1

    bad_kind = {**scan, "params": {"samples": {"kind": "lattice"}, "window": 5}}
    with pytest.raises(ScenarioError, match="unknown kind 'lattice'"):
        parse_scenario(bad_kind)
    bad_region = {**scan, "params": {"samples": {"kind": "grid", "n": 10, "region": [[1, -1], [0, 1]]}, "window": 5}}
    with pytest.raises(ScenarioError, match="xmin < xmax"):
        parse_scenario(bad_region)
    bad_window = {**scan, "params": {"samples": {"kind": "points", "points": [[0, 0]]}, "window": 0}}
    with pytest.raises(ScenarioError, match="params.window"):
        parse_scenario(bad_window)


def test_first_tangency_needs_henon_and_a_bracket():
    base = {"experiment": "FirstTangency", "params": {"a_range": [1.0, 6.0]}}
    with pytest.raises(ScenarioError, match="henon"):
        parse_scenario({**base, "map": {"family": "linear", "matrix": [[2, 0], [0, 0.5]]}})
    with pytest.raises(ScenarioError, match="a_lo < a_hi"):
        parse_scenario({**base, "map": {"family": "henon", "b": 0.3}, "params": {"a_range": [6.0, 1.0]}})


def test_first_tangency_takes_a_from_the_bracket():
    base = {"experiment": "FirstTangency", "params": {"a_range": [1.0, 5.5]}}
    scenario = parse_scenario({**base, "map": {"family": "henon", "b": 0.3}})
    assert scenario.map_def.family.a == 5.5
    assert scenario.map_def.family.b == 0.3
    with pytest.raises(ScenarioError, match="map.a"):
        parse_scenario({**base, "map": {"family": "henon", "a": 6.0, "b": 0.3}})


def test_load_scenario_resolves_output_next_to_file(tmp_path):
    path = tmp_path / "pliss.json"
    path.write_text(json.dumps({**PLISS, "output": {"directory": "out"}}))
    scenario = load_scenario(path)
    assert scenario.output_directory == tmp_path / "out"


def test_load_scenario_reports_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ScenarioError, match="not valid JSON"):
        load_scenario(path)
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "missing.json")


SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.json")), ids=lambda p: p.stem)
def test_bundled_scenarios_are_valid(path):
    assert load_scenario(path).experiment in Experiment


def test_bundled_domination_scenario_uses_the_benchmark_window():
    scenario = load_scenario(SCENARIOS / "domination.json")
    assert scenario.params["window"] == 10
    assert scenario.params["delta"] == 0.2
