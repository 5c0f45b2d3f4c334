"""Command line: validate, build, analyze, certify, export and plane.

Exit codes: 0 when every check passes, 2 when a verification fails, 1 on a
build or input error.
"""
from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .errors import SquareLimitsError, StageError

EXIT_OK, EXIT_BUILD, EXIT_VERIFY = 0, 1, 2


def _load(scenario: str):
    from .scenario import load_scenario, reference_scenario, reference_scenarios
    p = Path(scenario)
    if p.is_file():
        return load_scenario(p)
    if scenario in reference_scenarios():
        return reference_scenario(scenario)
    click.echo(f"{scenario!r} is neither a file nor a reference scenario "
               f"({', '.join(reference_scenarios())})", err=True)
    sys.exit(EXIT_BUILD)


def _apply_overrides(sc, seed, mesh_h, n0, n1):
    if seed is not None:
        sc.enumeration["seed"] = seed
    if mesh_h is not None:
        sc.permeation["mesh_h"] = mesh_h
    if sc.analysis and (n0 or n1):
        if n0:
            sc.analysis["N0"] = n0
        if n1:
            sc.analysis["N1"] = n1
    return sc


def _out_dir(sc, out):
    return Path(out or sc.output or f"out/{sc.name}")


def _build(sc, out=None, verify=True):
    from .pipeline import run_pipeline
    try:
        return run_pipeline(sc, verify=verify)
    except StageError as exc:
        click.echo(f"build failed at stage '{exc.stage}': {exc.cause}", err=True)
        if exc.partial:
            from .reports import write_json
            path = _out_dir(sc, out) / "partial_state.json"
            write_json(path, {"stage": exc.stage, "error": str(exc.cause), "partial": exc.partial})
            click.echo(f"partial state written to {path}", err=True)
        sys.exit(EXIT_BUILD)
    except SquareLimitsError as exc:
        click.echo(f"build failed: {exc}", err=True)
        sys.exit(EXIT_BUILD)


def _finish(summary: dict) -> None:
    for name, ok in summary.get("verdicts", {}).items():
        click.echo(f"{'PASS' if ok else 'FAIL'}  {name}")
    sys.exit(EXIT_OK if summary.get("passed", True) else EXIT_VERIFY)


scenario_arg = click.argument("scenario")
out_opt = click.option("--out", "out", type=click.Path(file_okay=False), default=None,
                       help="Output directory (default: the scenario's output field).")
seed_opt = click.option("--seed", type=int, default=None, help="Override the enumeration seed.")
mesh_opt = click.option("--mesh-h", type=float, default=None, help="Collapse mesh size (default: per hutch).")
n0_opt = click.option("--n0", type=int, default=None, help="Burn-in steps for limit estimates.")
n1_opt = click.option("--n1", type=int, default=None, help="Window length for limit estimates.")


@click.group()
@click.option("-v", "--verbose", count=True, help="Log progress (-vv for debug).")
def main(verbose: int):
    """Build and check square homeomorphisms with prescribed limit sets."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@scenario_arg
def validate(scenario):
    """Check a scenario's hypotheses and list every violation."""
    from .scenario import errors_only, validate_scenario
    try:
        sc = _load(scenario)
    except SquareLimitsError as exc:
        click.echo(f"invalid scenario: {exc}", err=True)
        sys.exit(EXIT_BUILD)
    diags = validate_scenario(sc)
    for d in diags:
        click.echo(f"{d.severity:5s} {d.code:14s} {d.index} {d.message}")
    sys.exit(EXIT_VERIFY if errors_only(diags) else EXIT_OK)


@main.command()
@scenario_arg
@out_opt
@seed_opt
@mesh_opt
def build(scenario, out, seed, mesh_h):
    """Build psi, verify the steering and collapse stages, and save the maps."""
    from .reports import build_summary, verdicts, write_json, write_maps
    sc = _apply_overrides(_load(scenario), seed, mesh_h, None, None)
    arts = _build(sc, out)
    d = _out_dir(sc, out)
    write_maps(arts, d)
    summary = build_summary(arts) | {"timings": arts.timings}
    summary["verdicts"] = verdicts(arts, {})
    summary["passed"] = all(summary["verdicts"].values())
    write_json(d / "build.json", summary)
    click.echo(f"built {sc.name} into {d}")
    _finish(summary)


@main.command()
@scenario_arg
@out_opt
@seed_opt
@mesh_opt
@n0_opt
@n1_opt
@click.option("--only", default=None,
              help="Comma-separated analyses: limits,certificate,nonwandering,entropy,plane.")
def analyze(scenario, out, seed, mesh_h, n0, n1, only):
    """Build, run the scenario's analyses and write the reports."""
    from .pipeline import analyze as run_analysis
    from .reports import emit_reports
    sc = _apply_overrides(_load(scenario), seed, mesh_h, n0, n1)
    arts = _build(sc, out)
    results = run_analysis(arts, None if only is None else set(only.split(",")))
    d = _out_dir(sc, out)
    summary = emit_reports(arts, results, d)
    click.echo(f"reports for {sc.name} in {d}")
    _finish(summary)


@main.command()
@scenario_arg
@out_opt
@seed_opt
@n0_opt
@n1_opt
def certify(scenario, out, seed, n0, n1):
    """Build and run only the sensitivity certificate."""
    from .pipeline import analyze as run_analysis
    from .reports import emit_reports
    sc = _apply_overrides(_load(scenario), seed, None, n0, n1)
    if not sc.analysis:
        sc.analysis = {"certificate": {}}
    sc.analysis.setdefault("certificate", {})
    arts = _build(sc, out, verify=False)
    results = run_analysis(arts, {"certificate", "annulus"})
    summary = emit_reports(arts, results, _out_dir(sc, out))
    if "certificate" in summary and summary["certificate"]["failure"]:
        click.echo(summary["certificate"]["failure"])
    _finish(summary)


@main.command()
@scenario_arg
@out_opt
@seed_opt
@mesh_opt
def export(scenario, out, seed, mesh_h):
    """Write map documents, collapse meshes and plot-ready polylines."""
    from .reports import geometry_rows, write_csv, write_maps
    sc = _apply_overrides(_load(scenario), seed, mesh_h, None, None)
    arts = _build(sc, out, verify=False)
    d = _out_dir(sc, out)
    files = write_maps(arts, d)
    write_csv(d / "geometry.csv", ["object", "index", "vertex", "r", "s"], geometry_rows(arts))
    click.echo(f"wrote {len(files) + 1} files to {d}")


@main.command()
@scenario_arg
@seed_opt
@click.option("--points", type=int, default=20, help="Number of starting points.")
@click.option("--steps", type=int, default=100, help="Orbit length.")
def plane(scenario, seed, points, steps):
    """Replay orbits of the planar extension against chart images of square orbits."""
    import numpy as np

    from .pipeline import plane_replay
    from .reports import THRESHOLDS
    sc = _apply_overrides(_load(scenario), seed, None, None, None)
    if sc.mode == "annulus-control":
        click.echo("the annulus map has no planar extension", err=True)
        sys.exit(EXIT_BUILD)
    arts = _build(sc, verify=False)
    P = np.vstack(arts.test_points(points // sc.m + 1))[:points]
    rep = plane_replay(arts.psi, P, steps)
    click.echo(f"max relative error {rep['max_relative_error']:.3g} over {rep['points']} points x "
               f"{rep['steps']} steps")
    _finish({"verdicts": {"plane": rep["max_relative_error"] < THRESHOLDS["plane_error"]},
             "passed": rep["max_relative_error"] < THRESHOLDS["plane_error"]})


if __name__ == "__main__":
    main()
