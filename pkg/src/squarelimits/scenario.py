"""Scenario files: schema, loading and hypothesis checks.

A scenario is a YAML (or JSON) document::

    version: 1
    name: point-targets-m3
    mode: point-targets        # edge-limits | point-targets | tree-targets | annulus-control | plane
    targets:                   # one entry per family n
      - omega: [0.2, 0.9]      # point [r, s]; tree {vertices: [[r, s], ...], edges: [[i, j], ...]};
        alpha: [0.2, -0.9]     # in edge-limits mode an abscissa arc [lo, hi] on the top/bottom edge
    rising: {cells: 10000000, fill: 0.5, c: 0.5, strength: 0.25, horizon: 64, margin: 0.05}
    steering: {lam: 2.0, eps: 0.2, K: 64, schedule: polynomial}
    enumeration: {seed: 7}
    permeation: {mesh_h: null, shrink: 0.5}     # null picks a size per hutch
    analysis: {...}                              # see DEFAULT_ANALYSIS; empty means build only
    output: out/point-targets-m3

Targets indexed by n are the finite stand-ins for the countable families of
the construction; distances to the edges are recorded rather than limits.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml
from shapely.geometry import MultiLineString, Point

from .errors import InvalidInputError, MarginError, PlacementError
from .geometry import PLTree, validate_tree_embedding

SCHEMA_VERSION = 1
MODES = ("edge-limits", "point-targets", "tree-targets", "annulus-control", "plane")

DEFAULT_RISING = {"cells": 10_000_000, "fill": 0.5, "c": 0.5, "strength": 0.25, "horizon": 64.0,
                  "margin": 0.05}
DEFAULT_STEERING = {"lam": 2.0, "eps": 0.2, "K": 64, "schedule": "polynomial"}
DEFAULT_ANALYSIS = {
    "N0": 500,
    "N1": 2000,
    "limits": {"per_family": 10},
    "certificate": {"n": None, "grid": 5, "radius": 0.05, "samples": 200, "c_factor": 0.8, "seed": 0},
    "nonwandering": {"samples": 1000, "seed": 0},
    "entropy": {"eps": 0.05, "n_max": 20, "grid": 100},
    "plane": {"points": 20, "steps": 100},
    "annulus": {"heights": 200, "witness_n": 3, "witness_c": 0.1, "radius": 0.01, "c": 0.1, "grid": 5},
}


@dataclass
class Scenario:
    name: str
    mode: str
    targets: list = field(default_factory=list)
    rising: dict = field(default_factory=dict)
    steering: dict = field(default_factory=dict)
    enumeration: dict = field(default_factory=dict)
    permeation: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)
    output: str | None = None
    version: int = SCHEMA_VERSION

    @property
    def m(self) -> int:
        return len(self.targets)

    @property
    def seed(self) -> int:
        return int(self.enumeration.get("seed", 0))

    def rising_params(self) -> dict:
        return {**DEFAULT_RISING, **self.rising}

    def steering_params(self) -> dict:
        return {**DEFAULT_STEERING, **self.steering}

    def analysis_params(self) -> dict:
        """Analysis settings merged over the defaults; empty when none were requested."""
        if not self.analysis:
            return {}
        out = copy.deepcopy(DEFAULT_ANALYSIS)
        for k, v in self.analysis.items():
            if isinstance(v, dict) and isinstance(out.get(k), dict):
                out[k].update(v)
            else:
                out[k] = v
        return out

    def to_dict(self) -> dict:
        return {"version": self.version, "name": self.name, "mode": self.mode, "targets": self.targets,
                "rising": self.rising, "steering": self.steering, "enumeration": self.enumeration,
                "permeation": self.permeation, "analysis": self.analysis, "output": self.output}

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise InvalidInputError("a scenario must be a mapping")
        if d.get("version") != SCHEMA_VERSION:
            raise InvalidInputError(f"unsupported scenario version {d.get('version')!r}")
        unknown = set(d) - {"version", "name", "mode", "targets", "rising", "steering", "enumeration",
                            "permeation", "analysis", "output"}
        if unknown:
            raise InvalidInputError(f"unknown scenario fields {sorted(unknown)}")
        return cls(name=str(d.get("name", "")), mode=str(d.get("mode", "")),
                   targets=list(d.get("targets") or []), rising=dict(d.get("rising") or {}),
                   steering=dict(d.get("steering") or {}), enumeration=dict(d.get("enumeration") or {}),
                   permeation=dict(d.get("permeation") or {}), analysis=dict(d.get("analysis") or {}),
                   output=d.get("output"), version=int(d["version"]))


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    return Scenario.from_dict(yaml.safe_load(text))


def reference_scenarios() -> list[str]:
    root = resources.files("squarelimits") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def reference_scenario(name: str) -> Scenario:
    root = resources.files("squarelimits") / "scenarios"
    p = root / f"{name}.yaml"
    if not p.is_file():
        raise InvalidInputError(f"no reference scenario {name!r}; have {reference_scenarios()}")
    return Scenario.from_dict(yaml.safe_load(p.read_text()))


# -- target parsing ---------------------------------------------------------------

def parse_target(t) -> PLTree:
    """A point [r, s] or a tree mapping, as a PL tree."""
    if isinstance(t, dict):
        V = np.asarray(t["vertices"], float).reshape(-1, 2)
        return PLTree(V, tuple(tuple(e) for e in t.get("edges", ())))
    return PLTree(np.asarray(t, float).reshape(1, 2), ())


def target_trees(sc: Scenario) -> list[tuple[PLTree, PLTree]]:
    return [(parse_target(t["omega"]), parse_target(t["alpha"])) for t in sc.targets]


def _shape(T: PLTree):
    if not T.edges:
        return Point(T.vertices[0])
    return MultiLineString([list(map(tuple, s)) for s in T.segments])


# -- validation -----------------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    code: str
    index: tuple
    message: str
    severity: str = "error"   # "error" or "note"

    def to_dict(self):
        return {"code": self.code, "index": list(self.index), "message": self.message,
                "severity": self.severity}


def validate_scenario(sc: Scenario) -> list[Diagnostic]:
    """Every violated hypothesis, with the offending index; notes record finite stand-ins."""
    out: list[Diagnostic] = []
    err = lambda code, idx, msg: out.append(Diagnostic(code, tuple(idx), msg))
    note = lambda code, idx, msg: out.append(Diagnostic(code, tuple(idx), msg, "note"))
    if sc.mode not in MODES:
        err("mode", (), f"unknown mode {sc.mode!r}; expected one of {MODES}")
        return out
    if not sc.name:
        err("name", (), "scenario needs a name")
    st = sc.steering_params()
    if not st["lam"] > 1 or not st["eps"] > 0 or int(st["K"]) < 0:
        err("budget", (), "steering needs lam > 1, eps > 0 and K >= 0")
    if st["schedule"] not in ("geometric", "polynomial"):
        err("budget", (), f"unknown schedule {st['schedule']!r}")
    if sc.mode == "annulus-control":
        return out
    if sc.m < 1:
        err("targets", (), "at least one target family is needed")
        return out
    for n, t in enumerate(sc.targets):
        if not isinstance(t, dict) or "omega" not in t or "alpha" not in t:
            err("targets", (n,), "each family needs an omega and an alpha target")
    if out:
        return out

    rp = sc.rising_params()
    margin = float(rp["margin"])
    if sc.mode == "edge-limits":
        for n, t in enumerate(sc.targets):
            for key in ("omega", "alpha"):
                a = np.asarray(t[key], float).ravel()
                if a.size not in (1, 2) or a[0] > a[-1]:
                    err("arc", (n, key), f"edge target must be [lo, hi] with lo <= hi, got {t[key]}")
                elif a[0] < -1 + margin or a[-1] > 1 - margin:
                    err("margin", (n, key), f"edge arc {a.tolist()} closer than {margin} to a corner")
        return out

    try:
        trees = target_trees(sc)
    except Exception as exc:  # malformed entries are reported, not raised
        err("targets", (), f"could not parse targets: {exc}")
        return out
    flat = [(n, key, T) for n, pair in enumerate(trees) for key, T in zip(("omega", "alpha"), pair)]
    for n, key, T in flat:
        if sc.mode in ("point-targets", "plane") and T.edges:
            err("kind", (n, key), "point-target mode takes points, not trees")
        if sc.mode == "tree-targets":
            d = validate_tree_embedding(T)
            if not d.valid:
                err("tree", (n, key), f"not an embedded tree: {d}")
        if np.any(np.abs(T.vertices) >= 1.0):
            err("interior", (n, key), "target must lie in the open square")
        else:
            edge = 1.0 if key == "omega" else -1.0
            note("edge-distance", (n, key),
                 f"distance to its edge {float(np.min(np.abs(edge - T.vertices[:, 1]))):.6g} "
                 "(finite family: recorded instead of a limit)")
    for i in range(len(flat)):
        for j in range(i + 1, len(flat)):
            a, b = _shape(flat[i][2]), _shape(flat[j][2])
            if a.distance(b) <= 0.0:
                err("disjoint", (flat[i][:2], flat[j][:2]), "targets are not pairwise disjoint")
    if sc.mode in ("point-targets", "plane"):
        note("strips", (), "each vertical strip meets finitely many targets (finite family)")
    if any(d.severity == "error" for d in out):
        return out
    # a trial placement exposes cable and hutch conflicts
    from .permeation import Target, place_cables_and_hutches
    try:
        place_cables_and_hutches([Target(T, 1.0 if key == "omega" else -1.0) for _, key, T in flat])
    except (PlacementError, MarginError, InvalidInputError) as exc:
        err("placement", (), f"cables or hutches cannot be placed: {exc}")
    return out


def errors_only(diags) -> list[Diagnostic]:
    return [d for d in diags if d.severity == "error"]
