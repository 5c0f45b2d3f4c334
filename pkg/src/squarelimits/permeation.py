"""Hanging sets, hutches and the maps that collapse a base arc onto a hanging tree.

A hanging set is a PL tree meeting one horizontal edge of the square in a
single leaf (its foot), optionally split into a floating part and the cable
that ties it to the edge. A hutch is a convex polygon around it whose side on
that edge is the base arc. The collapse map of a hutch is built on a channel
mesh (see ``channel_mesh``); a family of collapse maps on disjoint hutches,
identity elsewhere, is a single map node.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree
from shapely.geometry import LineString, MultiLineString, Polygon, box

from .channel_mesh import ChannelMesh, build_channel_mesh
from .errors import (InvalidFamilyError, InvalidInputError, MarginError, NearSingularError,
                     PlacementError, ResolutionError, UnsupportedStructureError)
from .geometry import (Location, PLTree, PolygonDisc, Polyline, Segment1D, distance_to_segments,
                       hausdorff_distance, point_segment_distance, sample_segments,
                       segments_intersect, validate_tree_embedding)
from .map_algebra import MapExpr, State, moved_state, register_kind

log = logging.getLogger(__name__)

EDGE_EPS = 1e-12


# -- hanging sets and hutches ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HangingSet:
    """Tree hanging from the edge s = ``edge``.

    With a cable, ``tree`` is the floating part Y (possibly a single point) and
    ``cable`` runs from the edge (first vertex) to a point of Y (last vertex).
    Without one, ``tree`` itself must touch the edge in exactly one leaf.
    """

    edge: float
    tree: PLTree
    cable: Polyline | None = None

    def __post_init__(self):
        if self.edge not in (-1.0, 1.0):
            raise InvalidInputError("hanging sets hang from s = 1 or s = -1")

    def combined(self):
        """(vertices, edges, foot, junction, floating vertex indices) of the whole set."""
        V = [tuple(v) for v in self.tree.vertices]
        E = [tuple(e) for e in self.tree.edges]
        y_idx = set(range(len(V)))
        if self.cable is None:
            on = [i for i, v in enumerate(V) if v[1] == self.edge]
            if len(on) != 1:
                raise InvalidInputError("a cable-free hanging tree must touch the edge in one vertex")
            return np.array(V), np.array(E, dtype=np.int64).reshape(-1, 2), on[0], None, set()
        cv = self.cable.vertices
        end = tuple(cv[-1])
        if end in V:
            j = V.index(end)
        else:
            # the cable lands inside an edge of Y: split that edge there
            for k, (a, b) in enumerate(E):
                if point_segment_distance(np.array([end]), np.array(V[a]), np.array(V[b]))[0] < 1e-12:
                    V.append(end)
                    j = len(V) - 1
                    E[k] = (a, j)
                    E.append((j, b))
                    y_idx.add(j)
                    break
            else:
                raise InvalidInputError("the cable does not end on the floating tree")
        prev = j
        for p in cv[-2::-1]:
            V.append(tuple(p))
            E.append((prev, len(V) - 1))
            prev = len(V) - 1
        return np.array(V), np.array(E, dtype=np.int64), prev, j, y_idx

    @property
    def segments(self) -> np.ndarray:
        V, E, *_ = self.combined()
        return np.stack([V[E[:, 0]], V[E[:, 1]]], axis=1)

    @property
    def floating_segments(self) -> np.ndarray:
        return self.tree.segments

    @property
    def foot(self) -> np.ndarray:
        V, _, f, _, _ = self.combined()
        return V[f]

    def sample(self, spacing: float) -> np.ndarray:
        return sample_segments(self.segments, spacing)

    def to_dict(self):
        return {"edge": self.edge, "tree": {"vertices": self.tree.vertices.tolist(),
                                            "edges": [list(e) for e in self.tree.edges]},
                "cable": None if self.cable is None else self.cable.vertices.tolist()}

    @classmethod
    def from_dict(cls, d):
        cable = None if d.get("cable") is None else Polyline(np.asarray(d["cable"], float))
        return cls(float(d["edge"]), PLTree(np.asarray(d["tree"]["vertices"], float),
                                             tuple(map(tuple, d["tree"]["edges"]))), cable)


@dataclass(frozen=True, eq=False)
class Hutch:
    disc: PolygonDisc
    base: Segment1D
    X: HangingSet

    def validate(self) -> None:
        V, E, foot, _, _ = self.X.combined()
        diag = validate_tree_embedding(PLTree(V, tuple(map(tuple, E))))
        if not diag.valid:
            raise UnsupportedStructureError(f"hanging set is not an embedded tree: {diag}")
        e = self.X.edge
        if not self.base.lo < V[foot, 0] < self.base.hi:
            raise InvalidInputError("the foot of the hanging set must be inside the open base arc")
        others = np.delete(V, foot, axis=0)
        if np.any(np.abs(others[:, 1] - e) <= 0.0):
            raise InvalidInputError("the hanging set meets the edge more than once")
        segs = self.X.segments
        pts = sample_segments(segs, 1e-3)
        pts = pts[np.abs(pts[:, 1] - e) > 0]
        if np.any(self.disc.locate(pts, tol=0.0) != Location.INSIDE):
            raise InvalidInputError("the hanging set leaves the interior of its hutch")
        if not _is_convex(self.disc.vertices):
            raise UnsupportedStructureError("hutch polygons must be convex")

    @property
    def polygon(self) -> Polygon:
        return Polygon(self.disc.vertices)

    def to_dict(self):
        return {"disc": self.disc.vertices.tolist(), "base": [self.base.lo, self.base.hi],
                "X": self.X.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(PolygonDisc(np.asarray(d["disc"], float)), Segment1D(*d["base"]),
                   HangingSet.from_dict(d["X"]))


def _is_convex(V) -> bool:
    d = np.roll(V, -1, axis=0) - V
    cross = d[:, 0] * np.roll(d, -1, axis=0)[:, 1] - d[:, 1] * np.roll(d, -1, axis=0)[:, 0]
    return bool(np.all(cross >= -1e-12) or np.all(cross <= 1e-12))


def hutch_from_polygon(poly: Polygon, X: HangingSet) -> Hutch:
    """Hutch on a convex polygon whose side on the edge line is the base arc."""
    e = X.edge
    V = np.asarray(poly.exterior.coords)[:-1].copy()
    V[np.abs(V[:, 1] - e) < 1e-9, 1] = e
    area = 0.5 * np.sum(V[:, 0] * np.roll(V[:, 1], -1) - np.roll(V[:, 0], -1) * V[:, 1])
    if area < 0:
        V = V[::-1]
    # drop repeated or collinear-duplicate vertices left by clipping
    keep = np.hypot(*(V - np.roll(V, 1, axis=0)).T) > 1e-12
    V = V[keep]
    on = V[V[:, 1] == e]
    if len(on) < 2:
        raise PlacementError("hutch polygon does not reach the edge")
    base = Segment1D(float(on[:, 0].min()), float(on[:, 0].max()))
    foot = X.foot
    # the foot becomes a polygon vertex on the base
    n = len(V)
    for i in range(n):
        a, b = V[i], V[(i + 1) % n]
        if a[1] == e and b[1] == e and min(a[0], b[0]) < foot[0] < max(a[0], b[0]):
            V = np.insert(V, i + 1, [foot[0], e], axis=0)
            break
    h = Hutch(PolygonDisc(V), base, X)
    h.validate()
    return h


# -- single collapse map ------------------------------------------------------------

@dataclass(eq=False)
class Permeating:
    hutch: Hutch
    mesh: ChannelMesh
    mesh_h: float
    _segs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._segs = self.hutch.X.segments

    @property
    def edge(self) -> float:
        return self.hutch.X.edge

    @property
    def a_prime(self) -> Segment1D:
        return Segment1D(*self.mesh.a_prime)

    @property
    def a_second(self) -> Segment1D | None:
        return None if self.mesh.a_second is None else Segment1D(*self.mesh.a_second)

    def in_hutch(self, P) -> np.ndarray:
        return self.hutch.disc.contains(P, closed=True)

    def _passive(self, P):
        """Points left alone: outside the hutch or on its boundary away from the open base."""
        loc = self.hutch.disc.locate(P, tol=EDGE_EPS)
        b = self.hutch.base
        on_open_base = (P[:, 1] == self.edge) & (P[:, 0] > b.lo) & (P[:, 0] < b.hi)
        return (loc == Location.OUTSIDE) | ((loc == Location.BOUNDARY) & ~on_open_base)

    def forward(self, P) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, float))
        out = P.copy()
        act = np.flatnonzero(~self._passive(P))
        if len(act):
            out[act] = self.mesh.forward(P[act])
        return out

    def distance_to_X(self, P) -> np.ndarray:
        return distance_to_segments(np.atleast_2d(P), self._segs)

    def inverse(self, P, strict: bool = True) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, float))
        out = P.copy()
        act = np.flatnonzero(~self._passive(P))
        if len(act):
            d = self.distance_to_X(P[act])
            if strict and np.any(d < self.mesh_h):
                raise NearSingularError(
                    f"{int(np.sum(d < self.mesh_h))} points within mesh_h = {self.mesh_h} of the hanging set")
            out[act] = self.mesh.inverse(P[act])
        return out

    def on_X(self, P, tol: float = EDGE_EPS) -> np.ndarray:
        return self.distance_to_X(P) <= tol

    def save_mesh(self, path) -> None:
        doc = {"format": "squarelimits.channel_mesh", "version": 1, "mesh_h": self.mesh_h,
               "hutch": self.hutch.to_dict(), "mesh": self.mesh.to_dict()}
        Path(path).write_text(json.dumps(doc))

    @classmethod
    def load_mesh(cls, path) -> "Permeating":
        doc = json.loads(Path(path).read_text())
        return cls(Hutch.from_dict(doc["hutch"]), ChannelMesh.from_dict(doc["mesh"]), doc["mesh_h"])


def wall_clearance(hutch: Hutch, spacing: float = 1e-3) -> float:
    """Distance from the hanging set, away from its foot, to the hutch wall."""
    V, E, foot, _, _ = hutch.X.combined()
    pts = sample_segments(np.stack([V[E[:, 0]], V[E[:, 1]]], axis=1), spacing)
    wall = hutch.disc.segments
    # near the foot the set necessarily meets the base; measure past a small collar
    d = distance_to_segments(pts, wall)
    r = np.hypot(*(pts - V[foot]).T)
    far = r > 4 * spacing
    return float(d[far].min()) if np.any(far) else float("inf")


def auto_mesh_h(hutch: Hutch, cap: float = 0.01) -> float:
    """A mesh size that leaves a few cells between the hanging set and the wall."""
    c = wall_clearance(hutch, spacing=min(cap, hutch.disc.diameter / 200))
    return float(min(cap, c / 3))


def build_tree_permeating(hutch: Hutch, mesh_h: float | None = None, shrink: float = 0.5) -> Permeating:
    if mesh_h is None:
        mesh_h = auto_mesh_h(hutch)
    if not mesh_h > 0:
        raise InvalidInputError("mesh_h must be positive")
    hutch.validate()
    V, E, foot, junction, y_idx = hutch.X.combined()
    clearance = wall_clearance(hutch, spacing=mesh_h / 2)
    if clearance < 2 * mesh_h:
        raise ResolutionError(f"hanging set passes within {clearance:.3g} of the hutch wall",
                              suggested_mesh_h=clearance / 3)
    mesh = build_channel_mesh(hutch.disc.vertices, hutch.X.edge, V, E, foot, junction, y_idx,
                              mesh_h, shrink)
    return Permeating(hutch, mesh, mesh_h)


def permeating_axioms(p: Permeating, samples: int = 10_000, seed: int = 0,
                      collision_tol: float = 1e-9) -> dict:
    """Numerical checks of the collapse-map axioms at the mesh resolution.

    Discrepancies are measured on mesh nodes: images of the nodes on a sub-arc
    against a dense sample of the set they should cover.
    """
    rng = np.random.default_rng(seed)
    h = p.mesh_h
    m = p.mesh
    D = p.hutch.disc
    e = p.edge
    Xd = p.hutch.X.sample(h / 50)

    # identity on the boundary away from the open base
    bs = sample_segments(D.segments, h / 4)
    b = p.hutch.base
    off = ~((bs[:, 1] == e) & (bs[:, 0] > b.lo) & (bs[:, 0] < b.hi))
    bs = bs[off]
    identity_ok = bool(np.array_equal(p.forward(bs), bs))

    # the middle sub-arc covers the hanging set
    tour_pts = np.column_stack([m.tour_t, np.full(len(m.tour_t), e)])
    img_ap = p.forward(tour_pts)
    h_ap = hausdorff_distance(img_ap, Xd)

    # the rest of the base covers the base minus the foot, injectively
    side = np.concatenate([m.a_left, m.a_right])
    side_pts = np.vstack([m.P[side], [[b.lo, e], [b.hi, e]]])
    img_side = p.forward(side_pts)
    base_dense = np.column_stack([np.linspace(b.lo, b.hi, int(np.ceil((b.hi - b.lo) / (h / 50))) + 1),
                                  np.full(int(np.ceil((b.hi - b.lo) / (h / 50))) + 1, e)])
    h_side = hausdorff_distance(img_side, base_dense)
    side_order = np.argsort(side_pts[:, 0])
    side_monotone = bool(np.all(np.diff(img_side[side_order, 0]) > 0))

    out = {"mesh_h": h, "triangles": int(len(m.T)), "identity_on_boundary": identity_ok,
           "hausdorff_aprime_X": float(h_ap), "hausdorff_base_rest": float(h_side),
           "base_rest_injective": side_monotone}

    if m.a_second is not None:
        ys = [i for i, v in enumerate(m.tour) if m.a_second[0] <= m.tour_t[i] <= m.a_second[1]]
        img_y = img_ap[ys]
        Yd = sample_segments(p.hutch.X.floating_segments, h / 50) if p.hutch.X.tree.edges \
            else p.hutch.X.tree.vertices
        out["hausdorff_asecond_Y"] = float(hausdorff_distance(img_y, Yd))

    # interior samples: injectivity and avoidance of the hanging set
    lo, hi = D.vertices.min(axis=0), D.vertices.max(axis=0)
    S = np.empty((0, 2))
    while len(S) < samples:
        C = rng.uniform(lo, hi, (2 * samples, 2))
        C = C[D.locate(C, tol=EDGE_EPS) == Location.INSIDE]
        S = np.vstack([S, C])
    S = S[:samples]
    img = p.forward(S)
    dd, _ = cKDTree(img).query(img, k=2)
    min_pair = float(dd[:, 1].min())
    out["collision_min_distance"] = min_pair
    out["collisions"] = int(np.sum(dd[:, 1] <= collision_tol))
    out["min_image_distance_to_X"] = float(p.distance_to_X(img).min())

    # coverage of D minus a 2h-neighbourhood of X by images of refined mesh samples
    g = np.linspace(0, 1, 50)
    G = np.column_stack([np.repeat(lo[0] + (hi[0] - lo[0]) * g, 50), np.tile(lo[1] + (hi[1] - lo[1]) * g, 50)])
    G = G[(D.locate(G, tol=0.0) == Location.INSIDE) & (p.distance_to_X(G) > 2 * h)]
    bw = _subdivision_weights(3)
    dom = np.einsum("wk,tkd->twd", bw, m.P[m.Tc]).reshape(-1, 2)
    cov = cKDTree(p.forward(dom)).query(G)[0] if len(G) else np.zeros(0)
    out["coverage_distance"] = float(cov.max()) if len(cov) else 0.0
    out["passed"] = bool(identity_ok and h_ap < h and side_monotone and out["collisions"] == 0
                         and out["min_image_distance_to_X"] > 0 and out["coverage_distance"] <= 2 * h
                         and out.get("hausdorff_asecond_Y", 0.0) < h)
    return out


def _subdivision_weights(n: int) -> np.ndarray:
    w = [(i / n, j / n, (n - i - j) / n) for i in range(n + 1) for j in range(n + 1 - i)]
    return np.asarray(w)


# -- families --------------------------------------------------------------------------

class CompositivePermeating(MapExpr):
    """Collapse maps on pairwise disjoint hutches, identity elsewhere."""

    kind = "permeating"
    homeomorphism = False
    lipschitz_bound = None

    def __init__(self, members: Sequence[Permeating], strict_inverse: bool = False,
                 refs: Sequence[str] | None = None):
        self.members = tuple(members)
        self.strict_inverse = strict_inverse
        self.refs = None if refs is None else tuple(refs)
        polys = [p.hutch.polygon for p in self.members]
        for i in range(len(polys)):
            for j in range(i + 1, len(polys)):
                if polys[i].intersects(polys[j]):
                    raise InvalidFamilyError((i, j))
        self._segs = (np.concatenate([p.hutch.X.segments for p in self.members])
                      if self.members else np.zeros((0, 2, 2)))

    @property
    def diameters(self) -> list:
        return [p.hutch.disc.diameter for p in self.members]

    def on_exceptional(self, P) -> np.ndarray:
        """Points of the two horizontal edges or of a hanging set."""
        P = np.atleast_2d(P)
        mask = np.abs(P[:, 1]) == 1.0
        if len(self._segs):
            rest = np.flatnonzero(~mask)
            if len(rest):
                mask[rest] = distance_to_segments(P[rest], self._segs) <= EDGE_EPS
        return mask

    def exceptional_mask(self, st: State) -> np.ndarray:
        return self.on_exceptional(st.points)

    def _apply(self, P, inverse: bool):
        out = P.copy()
        for p in self.members:
            box_lo = p.hutch.disc.vertices.min(axis=0) - EDGE_EPS
            box_hi = p.hutch.disc.vertices.max(axis=0) + EDGE_EPS
            near = np.flatnonzero(np.all((P >= box_lo) & (P <= box_hi), axis=1))
            if not len(near):
                continue
            out[near] = p.inverse(P[near], strict=self.strict_inverse) if inverse else p.forward(P[near])
        return out

    def forward_points(self, P) -> np.ndarray:
        return self._apply(np.atleast_2d(np.asarray(P, float)), False)

    def inverse_points(self, P, strict: bool = True) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, float))
        out = P.copy()
        for p in self.members:
            near = np.flatnonzero(p.in_hutch(P))
            if len(near):
                out[near] = p.inverse(P[near], strict=strict)
        return out

    def _fwd(self, st):
        out = self._apply(st.points, False)
        return moved_state(st, out[:, 0], out[:, 1])

    def _inv(self, st):
        out = self._apply(st.points, True)
        return moved_state(st, out[:, 0], out[:, 1])

    def to_dict(self):
        if self.refs is not None:
            return {"kind": self.kind, "refs": list(self.refs)}
        return {"kind": self.kind,
                "members": [{"mesh_h": p.mesh_h, "hutch": p.hutch.to_dict(), "mesh": p.mesh.to_dict()}
                            for p in self.members]}


def _decode_compositive(d, resolver):
    if "refs" in d:
        load = resolver or Permeating.load_mesh
        return CompositivePermeating([load(r) for r in d["refs"]], refs=d["refs"])
    return CompositivePermeating([Permeating(Hutch.from_dict(m["hutch"]), ChannelMesh.from_dict(m["mesh"]),
                                             m["mesh_h"]) for m in d["members"]])


register_kind("permeating", _decode_compositive)


def build_compositive(perms: Sequence[Permeating]) -> CompositivePermeating:
    return CompositivePermeating(perms)


def eval_permeating_forward(xi: CompositivePermeating, x) -> np.ndarray:
    return xi.forward_points(np.asarray(tuple(x), float)[None, :])[0]


def eval_permeating_inverse(xi: CompositivePermeating, x) -> np.ndarray:
    P = np.asarray(tuple(x), float)[None, :]
    if xi.on_exceptional(P)[0]:
        raise NearSingularError(f"{tuple(x)} lies on an edge or a hanging set")
    return xi.inverse_points(P, strict=True)[0]


# -- placement ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Target:
    """A floating tree (one vertex for a point target) to be tied to an edge."""

    tree: PLTree
    edge: float

    @classmethod
    def point(cls, y, edge: float) -> "Target":
        return cls(PLTree(np.asarray([tuple(y)], float), ()), float(edge))

    @property
    def attach(self) -> np.ndarray:
        V = self.tree.vertices
        i = int(np.argmax(V[:, 1])) if self.edge > 0 else int(np.argmin(V[:, 1]))
        return V[i]


@dataclass
class Placement:
    hutches: list
    cables: list
    mus: list
    deltas: list


def _cable_clear(cable, tree: PLTree, attach, W) -> bool:
    a, b = cable
    if len(W):
        if np.any(point_segment_distance(W, a, b) <= 1e-12):
            return False
    for (p, q) in tree.segments:
        if np.allclose(p, q):
            continue
        touches_attach = np.allclose(p, attach) or np.allclose(q, attach)
        if touches_attach:
            other = q if np.allclose(p, attach) else p
            u, w = b - a, other - attach
            cross = u[0] * w[1] - u[1] * w[0]
            if abs(cross) <= 1e-12 * np.hypot(*u) * np.hypot(*w) and u @ w > 0:
                return False
            continue
        if segments_intersect(a, b, p, q, tol=1e-12):
            return False
    return True


def place_cables_and_hutches(targets: Sequence[Target], W_prefix=None, width_fraction: float = 0.5,
                             max_shrink: int = 8) -> Placement:
    """Straight cables of slope 1/mu from each target to its edge, with disjoint hutches."""
    W = np.zeros((0, 2)) if W_prefix is None else np.asarray(W_prefix, float).reshape(-1, 2)
    n = len(targets)
    attach = np.array([t.attach for t in targets]).reshape(-1, 2)
    for i, t in enumerate(targets):
        dist_edge = abs(t.edge - attach[i, 1])
        if dist_edge <= 0 or np.any(np.abs(t.tree.vertices) >= 1.0):
            raise InvalidInputError(f"target {i} must lie in the open square")
    betas = attach[:, 0]
    cables, mus, deltas, lengths = [], [], [], []
    for i, t in enumerate(targets):
        beta = betas[i]
        others = np.abs(betas - beta)
        others = others[others > 0]
        delta = min(others.min() if len(others) else np.inf, 1.0 - abs(beta)) / 6.0
        y = attach[i]
        L = abs(t.edge - y[1])
        for k in range(60):
            mu = delta * 2.0 ** -k
            x = y + np.sign(t.edge) * L * np.array([mu, 1.0])
            x[1] = t.edge
            if t.tree.edges and abs(x[0] - beta) >= 2 * delta:
                continue
            if _cable_clear((y, x), t.tree, y, W):
                break
        else:
            raise PlacementError(f"no admissible cable direction for target {i}; "
                                 f"W points near its vertical line block every slope")
        cables.append(np.array([x, y]))
        mus.append(mu)
        deltas.append(delta)
        lengths.append(float(np.hypot(*(x - y))))

    widths = []
    for i, t in enumerate(targets):
        w = width_fraction * min(deltas[i], 0.1 * lengths[i])
        if t.tree.edges:
            # wide enough to hold the tree, never reaching the side of the square
            w = min(width_fraction * 0.1 * lengths[i], 0.05)
        widths.append(w)

    square = box(-1.0, -1.0, 1.0, 1.0)
    for attempt in range(max_shrink):
        polys = []
        for i, t in enumerate(targets):
            geoms = [LineString(cables[i])]
            if t.tree.edges:
                geoms += [LineString(s) for s in t.tree.segments]
            shape = MultiLineString([list(g.coords) for g in geoms])
            poly = shape.buffer(widths[i], cap_style="square", join_style="mitre").convex_hull
            polys.append(poly.intersection(square))
        bad = [(i, j) for i in range(n) for j in range(i + 1, n) if polys[i].intersects(polys[j])]
        if not bad:
            break
        for i, j in bad:
            widths[i] /= 2
            widths[j] /= 2
    else:
        raise MarginError(f"hutches {bad[0]} still overlap after {max_shrink} shrinkings")

    hutches = []
    for i, t in enumerate(targets):
        X = HangingSet(t.edge, t.tree, Polyline(cables[i], is_arc=True))
        hu = hutch_from_polygon(polys[i], X)
        if not t.tree.edges and not hu.disc.diameter < 1.5 * lengths[i]:
            raise MarginError(f"hutch {i} diameter {hu.disc.diameter:.3g} exceeds 1.5 x cable length")
        hutches.append(hu)
    return Placement(hutches, cables, mus, deltas)
