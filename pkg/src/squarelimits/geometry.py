"""Planar primitives on the square J^2 = [-1, 1]^2.

Closed sets are carried as finite samples (point clouds) or as piecewise
linear structures (polylines, trees, polygons). Incidence predicates use a
fixed tolerance of ``TOL``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, InvalidInputError

TOL = 1e-9


@dataclass(frozen=True)
class PlanarPoint:
    r: float
    s: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and math.isfinite(self.s)):
            raise InvalidInputError(f"non-finite coordinates ({self.r}, {self.s})")

    def in_square(self, tol: float = 0.0) -> bool:
        return abs(self.r) <= 1 + tol and abs(self.s) <= 1 + tol

    def require_square(self) -> "PlanarPoint":
        if not self.in_square():
            raise DomainError(f"point ({self.r}, {self.s}) lies outside J^2")
        return self

    def __iter__(self):
        yield self.r
        yield self.s

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.s])


@dataclass(frozen=True)
class Segment1D:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise InvalidInputError(f"segment needs lo <= hi, got [{self.lo}, {self.hi}]")

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def sample(self, n: int) -> np.ndarray:
        if self.is_point:
            return np.array([self.lo])
        return np.linspace(self.lo, self.hi, n)


def as_points(obj) -> np.ndarray:
    """Coerce a PointCloud, PlanarPoint sequence or array into an (N, d) array."""
    if isinstance(obj, PointCloud):
        return obj.points
    if isinstance(obj, PlanarPoint):
        return obj.as_array()[None, :]
    arr = np.asarray([tuple(p) for p in obj] if not isinstance(obj, np.ndarray) else obj, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise InvalidInputError("point cloud must be an (N, d) array")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)


def euclidean_distance(a, b) -> float:
    a, b = np.asarray(tuple(a), float), np.asarray(tuple(b), float)
    return float(np.hypot(*(a - b))) if a.size == 2 else float(np.linalg.norm(a - b))


def _nonempty(A, B):
    a, b = as_points(A), as_points(B)
    if len(a) == 0 or len(b) == 0:
        raise InvalidInputError("distance between point clouds needs nonempty clouds")
    return a, b


def directed_hausdorff(A, B) -> float:
    a, b = _nonempty(A, B)
    d, _ = cKDTree(b).query(a)
    return float(d.max())


def hausdorff_distance(A, B) -> float:
    """Symmetric Hausdorff distance between two finite clouds."""
    return max(directed_hausdorff(A, B), directed_hausdorff(B, A))


def min_set_distance(A, B) -> float:
    """inf{d(a, b)} over the two clouds."""
    a, b = _nonempty(A, B)
    if len(a) > len(b):
        a, b = b, a
    d, _ = cKDTree(b).query(a)
    return float(d.min())


# -- segments -------------------------------------------------------------

def point_segment_distance(P: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each row of P to the segment [a, b]."""
    P = np.atleast_2d(P)
    ab = b - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        return np.hypot(*(P - a).T)
    t = np.clip(((P - a) @ ab) / L2, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(*(P - proj).T)


def distance_to_segments(P: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Distance from points P (N, 2) to the union of segments (M, 2, 2)."""
    P = np.atleast_2d(np.asarray(P, float))
    out = np.full(len(P), np.inf)
    for a, b in segs:
        np.minimum(out, point_segment_distance(P, a, b), out=out)
    return out


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def segments_intersect(p1, p2, q1, q2, tol: float = TOL) -> bool:
    """Closed-segment intersection test (touching counts)."""
    p1, p2, q1, q2 = (np.asarray(v, float) for v in (p1, p2, q1, q2))
    d1, d2 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    d3, d4 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and (
        (d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)
    ):
        return True
    return bool(
        point_segment_distance(p1, q1, q2)[0] <= tol
        or point_segment_distance(p2, q1, q2)[0] <= tol
        or point_segment_distance(q1, p1, p2)[0] <= tol
        or point_segment_distance(q2, p1, p2)[0] <= tol
    )


@dataclass(frozen=True, eq=False)
class Polyline:
    vertices: np.ndarray
    is_arc: bool = True

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 2:
            raise InvalidInputError("polyline needs at least two planar vertices")
        if np.any(np.hypot(*np.diff(v, axis=0).T) == 0):
            raise InvalidInputError("polyline has repeated consecutive vertices")
        object.__setattr__(self, "vertices", v)
        if self.is_arc and not self.is_simple():
            raise InvalidInputError("polyline flagged as an arc self-intersects")

    @property
    def segments(self) -> np.ndarray:
        return np.stack([self.vertices[:-1], self.vertices[1:]], axis=1)

    @property
    def length(self) -> float:
        return float(np.hypot(*np.diff(self.vertices, axis=0).T).sum())

    def is_simple(self) -> bool:
        segs = self.segments
        closed = np.allclose(self.vertices[0], self.vertices[-1])
        n = len(segs)
        for i in range(n):
            for j in range(i + 2, n):
                if closed and i == 0 and j == n - 1:
                    continue
                if segments_intersect(*segs[i], *segs[j]):
                    return False
        return True

    def sample(self, spacing: float) -> np.ndarray:
        return sample_segments(self.segments, spacing)


def sample_segments(segs: np.ndarray, spacing: float) -> np.ndarray:
    out = []
    for a, b in segs:
        n = max(1, int(math.ceil(np.hypot(*(b - a)) / spacing)))
        t = np.linspace(0.0, 1.0, n + 1)
        out.append(a + t[:, None] * (b - a))
    return np.unique(np.concatenate(out), axis=0)


@dataclass
class TreeDiagnostics:
    connected: bool
    acyclic: bool
    crossings: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.connected and self.acyclic and not self.crossings


@dataclass(frozen=True, eq=False)
class PLTree:
    vertices: np.ndarray
    edges: tuple

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) == 0:
            raise InvalidInputError("tree needs planar vertices")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "edges", tuple((int(a), int(b)) for a, b in self.edges))

    @property
    def segments(self) -> np.ndarray:
        if not self.edges:
            return np.stack([self.vertices[:1], self.vertices[:1]], axis=1)
        e = np.asarray(self.edges)
        return np.stack([self.vertices[e[:, 0]], self.vertices[e[:, 1]]], axis=1)

    @property
    def length(self) -> float:
        return float(np.hypot(*(self.segments[:, 1] - self.segments[:, 0]).T).sum())

    def sample(self, spacing: float) -> np.ndarray:
        if not self.edges:
            return self.vertices.copy()
        return sample_segments(self.segments, spacing)

    def degree(self) -> np.ndarray:
        deg = np.zeros(len(self.vertices), dtype=int)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def translated(self, offset) -> "PLTree":
        return PLTree(self.vertices + np.asarray(offset, float), self.edges)


def validate_tree_embedding(T: PLTree) -> TreeDiagnostics:
    """Check connectivity, acyclicity and planarity of an embedded tree."""
    n = len(T.vertices)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    acyclic = True
    for a, b in T.edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            acyclic = False
        else:
            parent[ra] = rb
    connected = len({find(i) for i in range(n)}) == 1
    acyclic = acyclic and len(T.edges) == n - 1

    crossings = []
    segs = T.segments
    for i, (a, b) in enumerate(T.edges):
        for j in range(i + 1, len(T.edges)):
            c, d = T.edges[j]
            shared = {a, b} & {c, d}
            if shared:
                # edges meeting at a vertex may only touch there
                (v,) = tuple(shared)[:1]
                other_i = b if a == v else a
                other_j = d if c == v else c
                p = T.vertices[v]
                u = T.vertices[other_i] - p
                w = T.vertices[other_j] - p
                cross = u[0] * w[1] - u[1] * w[0]
                if abs(cross) <= TOL * np.hypot(*u) * np.hypot(*w) and u @ w > 0:
                    crossings.append((i, j))
                continue
            if segments_intersect(*segs[i], *segs[j]):
                crossings.append((i, j))
    return TreeDiagnostics(connected=connected, acyclic=acyclic, crossings=crossings)


class Location(enum.Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclass(frozen=True, eq=False)
class PolygonDisc:
    """A polygonal disc bounded by a simple closed polyline (first == last)."""

    boundary: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundary, dtype=float)
        if len(b) >= 2 and not np.allclose(b[0], b[-1]):
            b = np.vstack([b, b[:1]])
        if len(b) < 4:
            raise InvalidInputError("polygon disc needs at least three distinct vertices")
        object.__setattr__(self, "boundary", b)
        if abs(self.signed_area) <= TOL:
            raise InvalidInputError("degenerate polygon (zero area)")
        if not Polyline(b, is_arc=True).is_simple():
            raise InvalidInputError("polygon boundary is not simple")

    @property
    def vertices(self) -> np.ndarray:
        return self.boundary[:-1]

    @property
    def signed_area(self) -> float:
        x, y = self.boundary[:, 0], self.boundary[:, 1]
        return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))

    @property
    def area(self) -> float:
        return abs(self.signed_area)

    @property
    def diameter(self) -> float:
        v = self.vertices
        d = np.hypot(v[:, None, 0] - v[None, :, 0], v[:, None, 1] - v[None, :, 1])
        return float(d.max())

    @property
    def segments(self) -> np.ndarray:
        return np.stack([self.boundary[:-1], self.boundary[1:]], axis=1)

    def winding_numbers(self, P) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, float))
        wn = np.zeros(len(P), dtype=int)
        for a, b in self.segments:
            up = (a[1] <= P[:, 1]) & (b[1] > P[:, 1])
            down = (a[1] > P[:, 1]) & (b[1] <= P[:, 1])
            side = (b[0] - a[0]) * (P[:, 1] - a[1]) - (P[:, 0] - a[0]) * (b[1] - a[1])
            wn += (up & (side > 0)).astype(int)
            wn -= (down & (side < 0)).astype(int)
        return wn

    def locate(self, P, tol: float = TOL) -> np.ndarray:
        """Vectorised point location; returns an array of Location values."""
        P = np.atleast_2d(np.asarray(P, float))
        on_edge = distance_to_segments(P, self.segments) <= tol
        inside = self.winding_numbers(P) != 0
        out = np.where(on_edge, Location.BOUNDARY, np.where(inside, Location.INSIDE, Location.OUTSIDE))
        return out

    def contains(self, P, closed: bool = True) -> np.ndarray:
        loc = self.locate(P)
        ok = loc == Location.INSIDE
        if closed:
            ok |= loc == Location.BOUNDARY
        return ok


def point_in_disc(x, D: PolygonDisc) -> Location:
    return D.locate(np.asarray(tuple(x), float)[None, :])[0]


def square_boundary_samples(n: int) -> np.ndarray:
    """n points spread evenly along the perimeter of J^2 (corners included)."""
    t = np.arange(n) * (8.0 / n)
    pts = np.empty((n, 2))
    for i, u in enumerate(t):
        side, f = int(u // 2), (u % 2) - 1.0
        pts[i] = [(f, -1.0), (1.0, f), (-f, 1.0), (-1.0, -f)][side]
    return pts


def distance_to_square_boundary(P) -> np.ndarray:
    P = np.atleast_2d(np.asarray(P, float))
    return np.min(1.0 - np.abs(P), axis=1)


def iter_pairs(items: Sequence) -> Iterable[tuple]:
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            yield i, j
