"""Piecewise-affine collapse of a boundary arc onto a hanging tree.

A convex hutch polygon is triangulated with the tree's edges as constraints.
Cutting the triangulation along the tree (one copy of each tree vertex per
wedge between tree edges) gives a disc whose boundary runs once around the
tree. That cut disc is re-embedded into the hutch by a convex-combination map
(mean-value weights from the original geometry): the hutch boundary away from
the base arc stays put, the walk around the tree is laid out along a middle
sub-arc of the base by arclength, and the rest of the base is compressed
linearly to make room. The collapse map sends each re-embedded triangle
affinely onto its original position, so the middle sub-arc lands on the tree
and the open disc lands injectively on the disc minus the tree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import triangle
from matplotlib.tri import Triangulation
from scipy import sparse
from scipy.sparse.linalg import splu
from scipy.spatial import cKDTree

from .errors import InternalConsistencyError, ResolutionError

X_MARK, B_MARK = 2, 1


@dataclass(eq=False)
class ChannelMesh:
    Q: np.ndarray  # original vertex coordinates
    T: np.ndarray  # triangles on original vertex indices (counter-clockwise)
    orig: np.ndarray  # cut vertex -> original vertex
    Tc: np.ndarray  # the same triangles on cut vertex indices
    P: np.ndarray  # re-embedded positions of cut vertices
    tour: np.ndarray  # cut vertices around the tree, from the left foot copy to the right one
    tour_t: np.ndarray  # abscissae of the tour on the base edge
    a_left: np.ndarray  # cut vertices on the base left of the foot
    a_right: np.ndarray
    a_prime: tuple  # (lo, hi) abscissae of the collapsing sub-arc
    a_second: tuple | None  # (lo, hi) sub-arc collapsing onto the floating part
    edge: float
    base: tuple  # (a0, a1)
    x_edges: np.ndarray  # (k, 2) original-index tree edges after subdivision

    def __post_init__(self):
        self._fwd_tri = Triangulation(self.P[:, 0], self.P[:, 1], self.Tc)
        self._inv_tri = Triangulation(self.Q[:, 0], self.Q[:, 1], self.T)
        self._fwd_finder = self._fwd_tri.get_trifinder()
        self._inv_finder = self._inv_tri.get_trifinder()
        self._fwd_cent = cKDTree(self.P[self.Tc].mean(axis=1))
        self._inv_cent = cKDTree(self.Q[self.T].mean(axis=1))

    @property
    def Qc(self) -> np.ndarray:
        return self.Q[self.orig]

    def _locate(self, X, finder, V, tris, cent):
        idx = np.asarray(finder(X[:, 0], X[:, 1]), dtype=np.int64)
        lost = np.flatnonzero(idx < 0)
        if len(lost):
            # points on the mesh boundary can slip through the trapezoid map
            k = min(12, len(tris))
            _, cand = cent.query(X[lost], k=k)
            cand = np.atleast_2d(cand).reshape(len(lost), k)
            best = np.full(len(lost), -1, dtype=np.int64)
            score = np.full(len(lost), -np.inf)
            for j in range(k):
                lam = _bary(V[tris[cand[:, j]]], X[lost])
                sc = lam.min(axis=1)
                better = sc > score
                best[better], score[better] = cand[better, j], sc[better]
            scale = np.ptp(V, axis=0).max()
            if np.any(score < -1e-9 * scale):
                raise InternalConsistencyError("mesh lookup failed for points inside the hutch")
            idx[lost] = best
        return idx

    def forward(self, X: np.ndarray) -> np.ndarray:
        idx = self._locate(X, self._fwd_finder, self.P, self.Tc, self._fwd_cent)
        lam = _bary(self.P[self.Tc[idx]], X)
        return np.einsum("ij,ijk->ik", lam, self.Qc[self.Tc[idx]])

    def inverse(self, X: np.ndarray) -> np.ndarray:
        idx = self._locate(X, self._inv_finder, self.Q, self.T, self._inv_cent)
        lam = _bary(self.Q[self.T[idx]], X)
        return np.einsum("ij,ijk->ik", lam, self.P[self.Tc[idx]])

    def to_dict(self) -> dict:
        return {
            "Q": self.Q.tolist(), "T": self.T.tolist(), "orig": self.orig.tolist(),
            "Tc": self.Tc.tolist(), "P": self.P.tolist(), "tour": self.tour.tolist(),
            "tour_t": self.tour_t.tolist(), "a_left": self.a_left.tolist(),
            "a_right": self.a_right.tolist(), "a_prime": list(self.a_prime),
            "a_second": None if self.a_second is None else list(self.a_second),
            "edge": self.edge, "base": list(self.base), "x_edges": self.x_edges.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelMesh":
        arr = lambda k, t=float: np.asarray(d[k], dtype=t)
        return cls(arr("Q"), arr("T", np.int64), arr("orig", np.int64), arr("Tc", np.int64),
                   arr("P"), arr("tour", np.int64), arr("tour_t"), arr("a_left", np.int64),
                   arr("a_right", np.int64), tuple(d["a_prime"]),
                   None if d["a_second"] is None else tuple(d["a_second"]),
                   float(d["edge"]), tuple(d["base"]), arr("x_edges", np.int64).reshape(-1, 2))


def _bary(V: np.ndarray, X: np.ndarray) -> np.ndarray:
    a, b, c = V[:, 0], V[:, 1], V[:, 2]
    v0, v1, v2 = b - a, c - a, X - a
    den = v0[:, 0] * v1[:, 1] - v1[:, 0] * v0[:, 1]
    l1 = (v2[:, 0] * v1[:, 1] - v1[:, 0] * v2[:, 1]) / den
    l2 = (v0[:, 0] * v2[:, 1] - v2[:, 0] * v0[:, 1]) / den
    return np.column_stack([1.0 - l1 - l2, l1, l2])


def signed_areas(V: np.ndarray, T: np.ndarray) -> np.ndarray:
    a, b, c = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


# -- triangulation ---------------------------------------------------------------

def _subdivide(a, b, h):
    n = max(1, int(math.ceil(np.hypot(*(b - a)) / h)))
    return [a] + [a + (b - a) * (i / n) for i in range(1, n)] + [b]


def _triangulate(boundary, Xv, Xe, h, edge):
    verts: list = []
    index: dict = {}

    def vid(p):
        key = (float(p[0]), float(p[1]))
        if key not in index:
            index[key] = len(verts)
            verts.append(key)
        return index[key]

    segs, marks = [], []
    nb = len(boundary)
    for i in range(nb):
        pts = _subdivide(boundary[i], boundary[(i + 1) % nb], h)
        for p, q in zip(pts, pts[1:]):
            segs.append((vid(p), vid(q)))
            marks.append(B_MARK)
    for a, b in Xe:
        pts = _subdivide(Xv[a], Xv[b], h)
        for p, q in zip(pts, pts[1:]):
            segs.append((vid(p), vid(q)))
            marks.append(X_MARK)
    area = math.sqrt(3) / 4 * h * h
    out = triangle.triangulate(
        {"vertices": np.array(verts), "segments": np.array(segs),
         "segment_markers": np.array(marks)[:, None]},
        f"pq28a{area:.12f}Q")
    Q = np.array(out["vertices"], dtype=float)
    T = np.array(out["triangles"], dtype=np.int64)
    S = np.array(out["segments"], dtype=np.int64)
    M = np.array(out["segment_markers"]).ravel()
    # triangle copies input coordinates, but new points on the base need snapping
    on_edge = np.abs(Q[:, 1] - edge) < 1e-12
    Q[on_edge, 1] = edge
    ar = signed_areas(Q, T)
    T[ar < 0] = T[ar < 0][:, [0, 2, 1]]
    return Q, T, S[M == X_MARK]


def _edge_table(T):
    """Undirected edges with the triangles using them."""
    e = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    tri = np.tile(np.arange(len(T)), 3)
    key = np.sort(e, axis=1)
    table: dict = {}
    for (a, b), t in zip(map(tuple, key), tri):
        table.setdefault((a, b), []).append(t)
    return table


def _split_edges(Q, T, edges):
    """Split interior edges at their midpoints (each edge borders two triangles)."""
    Q = list(map(tuple, Q))
    T = T.tolist()
    pending = set(edges)
    while pending:
        table = _edge_table(np.asarray(T))
        used = set()
        batch = []
        for e in list(pending):
            ts = table.get(e, [])
            if len(ts) != 2 or used & set(ts):
                continue
            used |= set(ts)
            batch.append((e, ts))
            pending.discard(e)
        if not batch:
            break
        for (a, b), ts in batch:
            m = len(Q)
            Q.append(tuple((np.asarray(Q[a]) + np.asarray(Q[b])) / 2))
            for t in ts:
                tri = T[t]
                i = next(i for i in range(3) if {tri[i], tri[(i + 1) % 3]} == {a, b})
                u, v, w = tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]
                T[t] = [u, m, w]
                T.append([m, v, w])
    return np.asarray(Q, dtype=float), np.asarray(T, dtype=np.int64)


def _cut(T, x_edges, x_vertices):
    """Duplicate tree vertices once per wedge between tree edges."""
    xset = {tuple(sorted(e)) for e in map(tuple, x_edges)}
    Tc = T.copy()
    orig = list(range(T.max() + 1))
    inc: dict = {}
    for t, tri in enumerate(T):
        for v in tri:
            if v in x_vertices:
                inc.setdefault(int(v), []).append(t)
    for v, ts in inc.items():
        parent = {t: t for t in ts}

        def find(t):
            while parent[t] != t:
                parent[t] = parent[parent[t]]
                t = parent[t]
            return t

        by_edge: dict = {}
        for t in ts:
            for w in T[t]:
                if w != v:
                    by_edge.setdefault((min(v, w), max(v, w)), []).append(t)
        for e, tt in by_edge.items():
            if e not in xset and len(tt) == 2:
                parent[find(tt[0])] = find(tt[1])
        groups: dict = {}
        for t in ts:
            groups.setdefault(find(t), []).append(t)
        for gi, members in enumerate(groups.values()):
            if gi == 0:
                continue
            nv = len(orig)
            orig.append(v)
            for t in members:
                Tc[t][T[t] == v] = nv
    return Tc, np.asarray(orig, dtype=np.int64)


def _boundary_loop(Tc):
    e = np.concatenate([Tc[:, [0, 1]], Tc[:, [1, 2]], Tc[:, [2, 0]]])
    key = np.sort(e, axis=1)
    _, inv, cnt = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    bnd = e[cnt[inv.ravel()] == 1]
    nxt = {}
    for a, b in bnd:
        if a in nxt:
            raise InternalConsistencyError("cut mesh boundary is not a simple loop")
        nxt[int(a)] = int(b)
    start = int(bnd[0, 0])
    loop = [start]
    while True:
        v = nxt[loop[-1]]
        if v == start:
            break
        loop.append(v)
    if len(loop) != len(nxt):
        raise InternalConsistencyError("cut mesh boundary has several components")
    return np.asarray(loop), bnd


def _chords(Tc, loop):
    on_b = np.zeros(Tc.max() + 1, dtype=bool)
    on_b[loop] = True
    e = np.concatenate([Tc[:, [0, 1]], Tc[:, [1, 2]], Tc[:, [2, 0]]])
    key = np.sort(e, axis=1)
    uk, cnt = np.unique(key, axis=0, return_counts=True)
    interior = uk[cnt == 2]
    return interior[on_b[interior[:, 0]] & on_b[interior[:, 1]]]


def _mvc_matrix(V, Tc, n):
    rows, cols, vals = [], [], []
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        vi, vj, vk = V[Tc[:, i]], V[Tc[:, j]], V[Tc[:, k]]
        eij, eik = vj - vi, vk - vi
        lij, lik = np.hypot(*eij.T), np.hypot(*eik.T)
        cross = eij[:, 0] * eik[:, 1] - eij[:, 1] * eik[:, 0]
        dot = (eij * eik).sum(axis=1)
        t = np.tan(np.arctan2(np.abs(cross), dot) / 2.0)
        rows += [Tc[:, i], Tc[:, i]]
        cols += [Tc[:, j], Tc[:, k]]
        vals += [t / lij, t / lik]
    return sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n, n)).tocsr()


def build_channel_mesh(boundary: np.ndarray, edge: float, Xv: np.ndarray, Xe: np.ndarray,
                       foot: int, junction: int | None, y_vertices: set, h: float,
                       shrink: float = 0.5) -> ChannelMesh:
    """Collapse map of a convex polygon onto a tree hanging from its base.

    ``boundary`` lists the polygon vertices counter-clockwise and must contain
    the foot Xv[foot] on the base (the polygon side on the line s = edge).
    ``junction`` is the tree vertex where the floating part starts (None when
    the whole tree hangs directly); ``y_vertices`` are the floating part's
    vertex indices. ``shrink`` is the fraction of each side of the base, next
    to the foot, that the tour occupies.
    """
    base_pts = boundary[boundary[:, 1] == edge]
    a0, a1 = float(base_pts[:, 0].min()), float(base_pts[:, 0].max())
    xf = float(Xv[foot, 0])
    if not (a0 < xf < a1) or Xv[foot, 1] != edge:
        raise ResolutionError("the foot must sit inside the base arc", h / 2)
    Q, T, x_edges = _triangulate(boundary, Xv, Xe, h, edge)

    def key_of(p):
        d = np.hypot(*(Q - p).T)
        i = int(np.argmin(d))
        if d[i] > 1e-12:
            raise InternalConsistencyError("tree vertex missing from the triangulation")
        return i

    foot_q = key_of(Xv[foot])
    junction_q = None if junction is None else key_of(Xv[junction])
    y_q = {key_of(Xv[i]) for i in y_vertices}

    for _ in range(4):
        x_vertices = set(np.unique(x_edges).tolist())
        Tc, orig = _cut(T, x_edges, x_vertices)
        loop, _ = _boundary_loop(Tc)
        ch = _chords(Tc, loop)
        if len(ch) == 0:
            break
        Q, T = _split_edges(Q, T, [tuple(sorted((int(orig[a]), int(orig[b])))) for a, b in ch])
    else:
        raise ResolutionError("could not remove chords of the cut mesh", h / 2)

    xv_mask = np.zeros(len(Q), dtype=bool)
    xv_mask[list(x_vertices)] = True
    is_x = xv_mask[orig[loop]]
    if not np.any(is_x):
        raise InternalConsistencyError("the tree does not reach the cut boundary")
    # the tree copies form one run of the loop, bounded by two copies of the foot
    nl = len(loop)
    start = next(i for i in range(nl) if is_x[i] and not is_x[i - 1])
    run_len = next(j for j in range(nl) if not is_x[(start + j) % nl])
    run = [loop[(start + j) % nl] for j in range(run_len)]
    if orig[run[0]] != foot_q or orig[run[-1]] != foot_q:
        raise InternalConsistencyError("tour around the tree does not start and end at the foot")
    before = loop[(start - 1) % nl]
    Qc = Q[orig]
    if Qc[before, 0] > xf:  # the run starts next to the right part of the base
        run = run[::-1]
    tour = np.asarray(run)
    seg = np.hypot(*np.diff(Qc[tour], axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    lo = xf - shrink * (xf - a0)
    hi = xf + shrink * (a1 - xf)
    tour_t = lo + (hi - lo) * cum / cum[-1]
    tour_t[0], tour_t[-1] = lo, hi

    n = len(orig)
    P = Qc.copy()
    fixed = np.zeros(n, dtype=bool)
    fixed[loop] = True
    P[tour, 0] = tour_t
    P[tour, 1] = edge
    on_base = fixed & (Qc[:, 1] == edge) & ~xv_mask[orig]
    left = np.flatnonzero(on_base & (Qc[:, 0] > a0) & (Qc[:, 0] < xf))
    right = np.flatnonzero(on_base & (Qc[:, 0] < a1) & (Qc[:, 0] > xf))
    P[left, 0] = a0 + (Qc[left, 0] - a0) * (lo - a0) / (xf - a0)
    P[right, 0] = a1 - (a1 - Qc[right, 0]) * (a1 - hi) / (a1 - xf)

    free = np.flatnonzero(~fixed)
    if len(free):
        Wm = _mvc_matrix(Qc, Tc, n)
        diag = np.asarray(Wm.sum(axis=1)).ravel()
        A = (sparse.diags(diag) - Wm)[free][:, free].tocsc()
        rhs = Wm[free][:, np.flatnonzero(fixed)] @ P[fixed]
        lu = splu(A)
        P[free, 0] = lu.solve(np.ascontiguousarray(rhs[:, 0]))
        P[free, 1] = lu.solve(np.ascontiguousarray(rhs[:, 1]))

    ar = signed_areas(P, Tc)
    if np.any(ar <= 0):
        raise ResolutionError(f"{int(np.sum(ar <= 0))} collapsed triangles in the re-embedded mesh",
                              h / 2)

    a_second = None
    if junction_q is not None:
        ys = [i for i, v in enumerate(tour) if orig[v] in y_q]
        a_second = (float(tour_t[ys[0]]), float(tour_t[ys[-1]]))
    return ChannelMesh(Q, T, orig, Tc, P, tour, tour_t, left, right, (lo, hi), a_second,
                       float(edge), (a0, a1), x_edges)
