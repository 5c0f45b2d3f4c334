"""Pipeline: rising map, steering conjugate, collapse conjugate, and the checks run on them."""
from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import analysis as an
from .errors import InvalidInputError, SquareLimitsError, StageError
from .geometry import Segment1D, sample_segments
from .map_algebra import (SQUARE, AnnulusRotation, Conjugate, Inverse, MapExpr, State,
                          TangentChart)
from .permeation import (CompositivePermeating, Permeating, Target, build_compositive,
                         build_tree_permeating, permeating_axioms, place_cables_and_hutches)
from .rising import CombBands, FiberedRisingMap, RisingSpec, build_rising
from .scenario import Scenario, errors_only, target_trees, validate_scenario
from .steering import (FiberFamilies, HaltonEnumeration, MappedEnumeration, SteeringBudget,
                       SteeringResult, build_steering, verify_steering)

log = logging.getLogger(__name__)

FINITE_FAMILY_NOTE = ("finite family: targets, hutches and enumerations are finite prefixes of the "
                      "countable families of the construction")


@dataclass
class PipelineArtifacts:
    scenario: Scenario
    psi: MapExpr
    f: FiberedRisingMap | None = None
    steering: SteeringResult | None = None
    phi: MapExpr | None = None
    xi: CompositivePermeating | None = None
    spec: RisingSpec | None = None
    W: HaltonEnumeration | None = None
    V: MappedEnumeration | None = None
    placement: object = None
    hashes: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def h(self) -> MapExpr | None:
        return None if self.steering is None else self.steering.h

    @property
    def perms(self) -> list[Permeating]:
        return [] if self.xi is None else list(self.xi.members)

    def omega_targets(self) -> list[np.ndarray]:
        """Dense samples of each family's declared omega target (metric coordinates)."""
        return self._targets(0)

    def alpha_targets(self) -> list[np.ndarray]:
        return self._targets(1)

    def _targets(self, side: int) -> list[np.ndarray]:
        sc = self.scenario
        if sc.mode == "edge-limits":
            edge = 1.0 if side == 0 else -1.0
            arcs = self.spec.omega if side == 0 else self.spec.alpha
            return [np.column_stack([a.sample(200), np.full(200, edge)]) for a in arcs]
        out = []
        for pair in target_trees(sc):
            T = pair[side]
            out.append(T.vertices.copy() if not T.edges else sample_segments(T.segments, 1e-3))
        return out

    def test_points(self, per_family: int) -> list[np.ndarray]:
        """The first steered points of each W family (points of the dense sets whose limits are designed)."""
        out = [[] for _ in range(self.scenario.m)]
        for st in self.steering.stages:
            w = self.W.family(st.family, 1, self._w_index(st))[0]
            if len(out[st.family]) < per_family:
                out[st.family].append(w)
        return [np.asarray(p).reshape(-1, 2) for p in out]

    def _w_index(self, stage) -> int:
        return self.V.source_index(stage.family, stage.source_index) if self.V is not None \
            else stage.source_index


def _hash(obj) -> str:
    h = hashlib.sha256()
    if isinstance(obj, np.ndarray):
        h.update(np.ascontiguousarray(obj).tobytes())
    else:
        h.update(json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable).encode())
    return h.hexdigest()[:16]


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


def _stage(name, fn, partial=None):
    try:
        return fn()
    except StageError:
        raise
    except (SquareLimitsError, ValueError) as exc:
        raise StageError(name, exc, partial) from exc


def _budget(sc: Scenario) -> SteeringBudget:
    p = sc.steering_params()
    return SteeringBudget(float(p["lam"]), float(p["eps"]), int(p["K"]), str(p["schedule"]))


def _rising_spec(sc: Scenario, omega, alpha) -> RisingSpec:
    rp = sc.rising_params()
    layout = CombBands(sc.m, int(rp["cells"]), float(rp["fill"]))
    return RisingSpec(layout, tuple(omega), tuple(alpha), c=float(rp["c"]), margin=float(rp["margin"]),
                      strength=float(rp["strength"]), horizon=float(rp["horizon"]))


def run_pipeline(sc: Scenario, verify: bool = True) -> PipelineArtifacts:
    """Build psi for a scenario, stage by stage; errors carry the stage name and partial state."""
    diags = errors_only(validate_scenario(sc))
    if diags:
        raise StageError("validate", InvalidInputError("; ".join(d.message for d in diags)),
                         {"diagnostics": [d.to_dict() for d in diags]})
    t0 = time.perf_counter()
    timings = {}
    hashes = {"scenario": _hash(sc.to_dict())}

    if sc.mode == "annulus-control":
        psi = AnnulusRotation()
        return PipelineArtifacts(sc, psi, hashes=hashes, timings={"build": time.perf_counter() - t0})

    W = HaltonEnumeration(sc.m, sc.seed)
    xi = None
    placement = None
    if sc.mode == "edge-limits":
        arc = lambda a: Segment1D(float(np.ravel(a)[0]), float(np.ravel(a)[-1]))
        omega = [arc(t["omega"]) for t in sc.targets]
        alpha = [arc(t["alpha"]) for t in sc.targets]
        V = None
    else:
        trees = target_trees(sc)
        targets = [Target(T, 1.0) for T, _ in trees] + [Target(T, -1.0) for _, T in trees]
        K = int(sc.steering_params()["K"])
        W_prefix = np.vstack([W.family(n, K + 1) for n in range(sc.m)])
        t = time.perf_counter()
        placement = _stage("placement", lambda: place_cables_and_hutches(targets, W_prefix))
        mesh_h = sc.permeation.get("mesh_h")
        shrink = float(sc.permeation.get("shrink", 0.5))
        perms = []
        for i, hu in enumerate(placement.hutches):
            perms.append(_stage(f"permeation[{i}]", lambda hu=hu: build_tree_permeating(hu, mesh_h, shrink),
                                {"hutches": [h.to_dict() for h in placement.hutches]}))
        xi = _stage("compositive", lambda: build_compositive(perms))
        timings["permeation"] = time.perf_counter() - t
        m = sc.m
        # the edge targets of the rising map are the arcs collapsing onto the floating targets
        omega = [Segment1D(*p.mesh.a_second) for p in perms[:m]]
        alpha = [Segment1D(*p.mesh.a_second) for p in perms[m:]]
        for i, p in enumerate(perms):
            hashes[f"mesh[{i}]"] = _hash(p.mesh.P)
        V = MappedEnumeration(W, lambda P: xi.inverse_points(P, strict=True))

    t = time.perf_counter()
    spec = _stage("rising", lambda: _rising_spec(sc, omega, alpha))
    f = _stage("rising", lambda: build_rising(spec), {"spec": spec.to_dict()})
    hashes["rising"] = _hash(spec.to_dict())
    timings["rising"] = time.perf_counter() - t

    t = time.perf_counter()
    budget = _budget(sc)
    source = V if V is not None else W
    steer = _stage("steering", lambda: build_steering(source, FiberFamilies(spec.layout), budget),
                   {"spec": spec.to_dict()})
    hashes["steering"] = _hash([[st.z.tolist(), st.y.tolist(), st.tau] for st in steer.stages])
    timings["steering"] = time.perf_counter() - t

    phi = Conjugate(Inverse(steer.h), f)
    psi = phi if xi is None else Conjugate(xi, phi)
    arts = PipelineArtifacts(sc, psi, f, steer, phi, xi, spec, W, V, placement, hashes, timings)
    if verify:
        t = time.perf_counter()
        arts.checks["steering"] = verify_steering(steer.h, source, FiberFamilies(spec.layout), budget.K,
                                                  budget, pairs=10_000, seed=sc.seed, stages=steer.stages)
        if xi is not None:
            arts.checks["permeation"] = [permeating_axioms(p, samples=2000, seed=i)
                                         for i, p in enumerate(xi.members)]
        timings["verify"] = time.perf_counter() - t
    timings["build"] = time.perf_counter() - t0
    return arts


# -- plane -------------------------------------------------------------------------------

def extend_to_plane(m: MapExpr) -> MapExpr:
    """F = H m H^-1 with H(r, s) = (tan(r pi / 2), tan(s pi / 2))."""
    if m.domain != SQUARE or m.codomain != SQUARE:
        raise InvalidInputError("only maps of the square extend to the plane")
    if not (m.homeomorphism and m.preserves_boundary):
        raise InvalidInputError("the map must be a homeomorphism keeping the boundary invariant")
    return Conjugate(TangentChart(), m)


def chart_formula(R, S, T) -> np.ndarray:
    """H written out directly, taking the edge distance from the height where it is finite."""
    from .interval_maps import edge_gap
    gap = np.where(np.isfinite(T), edge_gap(T), 1.0 - np.abs(S))
    with np.errstate(divide="ignore"):
        near = np.where(S >= 0, 1.0, -1.0) / np.tan(gap * np.pi / 2)
    y = np.where(gap < 0.5, near, np.tan(S * np.pi / 2))
    return np.stack([np.tan(R * np.pi / 2), y], axis=-1)


def plane_replay(psi: MapExpr, P, steps: int) -> dict:
    """F-orbits of H(w) against H applied to psi-orbits of w.

    The F-orbit starts from plane coordinates and recovers its square point
    through the inverse chart; the comparison applies the chart formula to the
    square orbit directly. Distances are relative to max(1, |point|), since
    chart coordinates grow without bound near the edges.
    """
    P = np.atleast_2d(np.asarray(P, float))
    F = extend_to_plane(psi)
    st = State.from_points(P)
    R, S, T = psi._orbit(st, 0, steps)
    ref = chart_formula(R, S, T)
    start = chart_formula(st.r, st.s, st.tau)
    Fs = State(start[:, 0], start[:, 1], TangentChart()._inv(State(start[:, 0], start[:, 1], st.tau)).tau)
    FR, FS, _ = F._orbit(Fs, 0, steps)
    got = np.stack([FR, FS], axis=-1)
    scale = np.maximum(1.0, np.abs(ref))
    err = np.abs(got - ref) / scale
    return {"points": int(len(P)), "steps": int(steps), "max_relative_error": float(np.max(err)),
            "max_abs_coordinate": float(np.max(np.abs(ref)))}


# -- analysis fan-out ----------------------------------------------------------------------

def min_target_separation(targets) -> float:
    from .geometry import min_set_distance
    return min(min_set_distance(a, b) for i, a in enumerate(targets) for b in targets[i + 1:])


def limit_realization(arts: PipelineArtifacts, per_family: int, N0: int, N1: int) -> list[dict]:
    rows = []
    om, al = arts.omega_targets(), arts.alpha_targets()
    for n, pts in enumerate(arts.test_points(per_family)):
        for d, tgt in ((an.OMEGA, om[n]), (an.ALPHA, al[n])):
            for i, e in enumerate(an.estimate_limit_sets(arts.psi, pts, d, N0, N1)):
                rows.append({"family": n, "index": i, "direction": d, "w_r": float(pts[i, 0]),
                             "w_s": float(pts[i, 1]), "hausdorff": e.hausdorff_to(tgt),
                             "diagnostic": e.diagnostic, "centroid_r": float(e.cloud.centroid[0]),
                             "centroid_s": float(e.cloud.centroid[1]), "estimate": e})
    return rows


def exceptional_samples(arts: PipelineArtifacts, count: int, seed: int) -> np.ndarray:
    """Points of the two horizontal edges and of the hanging sets."""
    rng = np.random.default_rng(seed)
    k = count // 2 if arts.xi is not None else count
    edges = np.column_stack([rng.uniform(-1, 1, k), rng.choice([-1.0, 1.0], k)])
    if arts.xi is None:
        return edges
    segs = np.concatenate([p.hutch.X.segments for p in arts.xi.members])
    lens = np.hypot(*(segs[:, 1] - segs[:, 0]).T)
    pick = rng.choice(len(segs), count - k, p=lens / lens.sum() if lens.sum() > 0 else None)
    t = rng.uniform(0, 1, count - k)[:, None]
    on_x = segs[pick, 0] + t * (segs[pick, 1] - segs[pick, 0])
    return np.vstack([edges, on_x])


def analyze(arts: PipelineArtifacts, only: set | None = None) -> dict:
    """Run the analyses the scenario asks for; keys of the result name them."""
    sc = arts.scenario
    ap = sc.analysis_params()
    if not ap:
        return {}
    requested = set(sc.analysis) - {"N0", "N1"}
    want = lambda k: (only is None or k in only) and k in requested
    N0, N1 = int(ap["N0"]), int(ap["N1"])
    out = {}
    psi = arts.psi
    if sc.mode == "annulus-control":
        p = ap["annulus"]
        rng = np.random.default_rng(sc.seed)
        P = np.column_stack([rng.uniform(0, 1, p["heights"]), rng.uniform(0, 1, p["heights"])])
        t = time.perf_counter()
        ws = an.witness_search(psi, int(p["witness_n"]), float(p["witness_c"]), P, (an.OMEGA,), N0, N1)
        cert = an.sensitivity_certificate(psi, 2, float(p["c"]), an.center_grid(psi, int(p["grid"])),
                                          float(p["radius"]), (an.OMEGA,), samples=200, seed=sc.seed,
                                          N0=N0, N1=N1)
        out["annulus"] = {"witness_search": ws, "certificate": cert,
                          "failing_centers": sum(not r.passed for r in cert.centers),
                          "seconds": time.perf_counter() - t}
        return out
    if want("limits"):
        t = time.perf_counter()
        out["limits"] = limit_realization(arts, int(ap["limits"]["per_family"]), N0, N1)
        out["limits_seconds"] = time.perf_counter() - t
    if want("certificate"):
        cp = ap["certificate"]
        n = int(cp["n"] or sc.m)
        sep = min(min_target_separation(arts.omega_targets()), min_target_separation(arts.alpha_targets())) \
            if sc.m > 1 else 0.1
        c = float(cp["c_factor"]) * sep
        t = time.perf_counter()
        cert = an.sensitivity_certificate(psi, n, c, an.center_grid(psi, int(cp["grid"])),
                                          float(cp["radius"]), an.DIRECTIONS, int(cp["samples"]),
                                          int(cp["seed"]), N0, N1)
        out["certificate"] = cert
        out["certificate_seconds"] = time.perf_counter() - t
    if want("nonwandering"):
        npar = ap["nonwandering"]
        C = exceptional_samples(arts, int(npar["samples"]), int(npar["seed"]))
        out["nonwandering"] = an.nonwandering_fixed_check(psi, C)
    if want("entropy"):
        ep = ap["entropy"]
        t = time.perf_counter()
        out["entropy"] = an.entropy_growth_estimate(psi, float(ep["eps"]), int(ep["n_max"]), int(ep["grid"]))
        out["entropy_seconds"] = time.perf_counter() - t
    if want("plane") and sc.mode == "plane":
        pp = ap["plane"]
        pts = np.vstack(arts.test_points(max(1, int(pp["points"]) // sc.m + 1)))[: int(pp["points"])]
        out["plane"] = plane_replay(psi, pts, int(pp["steps"]))
    return out
