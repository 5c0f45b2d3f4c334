import csv
import json

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from squarelimits.cli import EXIT_BUILD, EXIT_OK, EXIT_VERIFY, main
from squarelimits.errors import InvalidInputError
from squarelimits.map_algebra import forward, to_document
from squarelimits.pipeline import limit_realization, run_pipeline
from squarelimits.scenario import (Scenario, errors_only, reference_scenario, reference_scenarios,
                                   validate_scenario)


def scenario(**kw):
    d = {"version": 1, "name": "t", "mode": "point-targets",
         "targets": [{"omega": [0.2, 0.9], "alpha": [0.2, -0.9]}]}
    d.update(kw)
    return Scenario.from_dict(d)


def codes(sc):
    return {d.code for d in errors_only(validate_scenario(sc))}


def test_reference_scenarios_are_valid():
    names = reference_scenarios()
    assert {"annulus-control", "edge-limits", "plane", "point-targets-m2", "point-targets-m3",
            "tree-star"} <= set(names)
    for name in names:
        sc = reference_scenario(name)
        assert not errors_only(validate_scenario(sc)), name
        assert Scenario.from_dict(json.loads(sc.canonical_json())).canonical_json() == sc.canonical_json()
    with pytest.raises(InvalidInputError):
        reference_scenario("nope")


def test_from_dict_rejects_malformed_documents():
    with pytest.raises(InvalidInputError):
        Scenario.from_dict([1, 2])
    with pytest.raises(InvalidInputError):
        Scenario.from_dict({"version": 2, "name": "x", "mode": "plane"})
    with pytest.raises(InvalidInputError):
        Scenario.from_dict({"version": 1, "name": "x", "mode": "plane", "colour": "red"})


def test_validation_reports_each_violation():
    assert codes(scenario()) == set()
    notes = [d for d in validate_scenario(scenario()) if d.severity == "note"]
    assert any(d.code == "edge-distance" and d.index == (0, "omega") for d in notes)
    assert codes(scenario(mode="spiral")) == {"mode"}
    assert "budget" in codes(scenario(steering={"lam": 0.5}))
    assert "interior" in codes(scenario(targets=[{"omega": [0.2, 1.0], "alpha": [0.2, -0.9]}]))
    clash = scenario(targets=[{"omega": [0.2, 0.9], "alpha": [0.2, -0.9]},
                              {"omega": [0.2, 0.9], "alpha": [0.3, -0.9]}])
    dis = [d for d in errors_only(validate_scenario(clash)) if d.code == "disjoint"]
    assert dis and dis[0].index == ((0, "omega"), (1, "omega"))
    tree = {"vertices": [[0, 0.5], [0.1, 0.6]], "edges": [[0, 1]]}
    assert "kind" in codes(scenario(targets=[{"omega": tree, "alpha": [0.2, -0.9]}]))
    assert "margin" in codes(scenario(mode="edge-limits", targets=[{"omega": [-0.99, 0.2], "alpha": [0.1, 0.2]}]))
    assert "targets" in codes(scenario(targets=[{"omega": [0.2, 0.9]}]))


def test_analysis_params_merge_over_defaults():
    sc = scenario(analysis={"N0": 100, "entropy": {"eps": 0.1}})
    p = sc.analysis_params()
    assert p["N0"] == 100 and p["entropy"] == {"eps": 0.1, "n_max": 20, "grid": 100}
    assert scenario().analysis_params() == {}


@pytest.fixture(scope="module")
def m2(m2_artifacts):
    return m2_artifacts


def test_pipeline_realizes_prescribed_limits(m2):
    rows = limit_realization(m2, 3, 300, 1000)
    assert len(rows) == 2 * 3 * 2
    assert max(r["hausdorff"] for r in rows) < 0.05


def test_pipeline_is_deterministic(m2):
    again = run_pipeline(reference_scenario("point-targets-m2"), verify=False)
    assert to_document(again.psi) == to_document(m2.psi)
    P = np.vstack(m2.test_points(4))
    assert np.array_equal(forward(again.psi, P), forward(m2.psi, P))


def test_targets_are_fixed_and_empty_analysis_only_summarizes(m2, tmp_path):
    from squarelimits.reports import emit_reports
    Y = np.array([[0.2, 0.9], [0.2, -0.9], [-0.4, 0.95], [-0.4, -0.95]])
    assert np.array_equal(forward(m2.psi, Y), Y)
    emit_reports(m2, {}, tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["geometry.csv", "scenario.json", "summary.json"]


def test_plane_chart_values():
    from squarelimits.map_algebra import TangentChart
    H = TangentChart()
    assert np.array_equal(forward(H, [[0.0, 0.0]]), [[0.0, 0.0]])
    assert np.allclose(forward(H, [[0.5, 0.5]]), [[1.0, 1.0]], rtol=1e-15)


def run(*args):
    return CliRunner().invoke(main, list(args), catch_exceptions=False)


def test_cli_validate_exit_codes(tmp_path):
    assert run("validate", "point-targets-m2").exit_code == EXIT_OK
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"version": 1, "name": "bad", "mode": "point-targets",
                                   "targets": [{"omega": [0.2, 1.0], "alpha": [0.2, -0.9]}]}))
    r = run("validate", str(bad))
    assert r.exit_code == EXIT_VERIFY and "interior" in r.output
    assert run("validate", "no-such-scenario").exit_code == EXIT_BUILD
    broken = tmp_path / "broken.yaml"
    broken.write_text("version: 7\n")
    assert run("validate", str(broken)).exit_code == EXIT_BUILD


def test_cli_build_and_analyze(tmp_path):
    out = tmp_path / "m2"
    r = run("build", "point-targets-m2", "--out", str(out))
    assert r.exit_code == EXIT_OK, r.output
    summary = json.loads((out / "build.json").read_text())
    assert summary["passed"] and all(summary["verdicts"].values())
    r = run("analyze", "point-targets-m2", "--out", str(out), "--only", "limits", "--n0", "200", "--n1", "400")
    assert r.exit_code == EXIT_OK, r.output
    assert "PASS" in r.output
    rows = [r for r in csv.DictReader((out / "limits.csv").open())
            if r["family"] == "0" and r["direction"] == "omega"]
    assert rows and all(np.hypot(float(r["centroid_r"]) - 0.2, float(r["centroid_s"]) - 0.9) < 0.01 for r in rows)


def test_cli_build_is_reproducible(tmp_path):
    docs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert run("build", "point-targets-m2", "--out", str(d)).exit_code == EXIT_OK
        docs.append({p.relative_to(d): p.read_bytes() for p in sorted(d.rglob("*"))
                     if p.is_file() and p.name != "build.json"})  # build.json carries timings
    assert docs[0] == docs[1] and docs[0]


def test_cli_plane(tmp_path):
    r = run("plane", "point-targets-m2", "--points", "6", "--steps", "40")
    assert r.exit_code == EXIT_OK and "max relative error" in r.output
    assert run("plane", "annulus-control").exit_code == EXIT_BUILD
