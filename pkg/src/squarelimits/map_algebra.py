"""Expression trees of planar maps with orbit evaluation.

Every node acts on a batch ``State``: abscissae ``r``, ordinates ``s`` and a
lifted height ``tau`` (see ``interval_maps.height``). The height keeps the
vertical position exact after ``s`` has rounded onto an edge, which is what
long forward orbits of rising maps need. Nodes that move a point by a generic
planar formula recompute the height from the new ordinate; nodes that leave a
point alone pass the height through unchanged.

Conjugations ``outer o inner o outer^-1`` compute powers and orbits as
``outer o inner^k o outer^-1``, so the outer map and its inverse are applied
once per orbit rather than once per step. Points where the outer map is not
injective are fixed by convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InvalidInputError, NotInvertibleError, StepError
from .geometry import PlanarPoint
from .interval_maps import edge_gap, f01_eval, f01_inverse, from_height, height, height_from_gap

SQUARE, PLANE, ANNULUS = "square", "plane", "annulus"


@dataclass(frozen=True, eq=False)
class State:
    r: np.ndarray
    s: np.ndarray
    tau: np.ndarray

    @classmethod
    def from_points(cls, P, domain: str = SQUARE) -> "State":
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if P.ndim != 2 or P.shape[1] != 2:
            raise InvalidInputError("points must have shape (N, 2)")
        if not np.all(np.isfinite(P)):
            raise DomainError("non-finite coordinates")
        r, s = P[:, 0].copy(), P[:, 1].copy()
        if domain == SQUARE:
            if np.any(np.abs(P) > 1.0):
                raise DomainError("point outside J^2")
            tau = height(s)
        else:
            tau = np.full_like(s, np.nan)
        return cls(r, s, tau)

    def __len__(self):
        return len(self.r)

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.r, self.s])

    def take(self, idx) -> "State":
        return State(self.r[idx], self.s[idx], self.tau[idx])

    def put(self, idx, other: "State") -> "State":
        r, s, tau = self.r.copy(), self.s.copy(), self.tau.copy()
        r[idx], s[idx], tau[idx] = other.r, other.s, other.tau
        return State(r, s, tau)


def moved_state(old: State, r, s) -> State:
    """New state after a planar move: heights kept where the ordinate did not move."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    tau = old.tau.copy()
    moved = s != old.s
    if np.any(moved):
        tau[moved] = height(np.clip(s[moved], -1.0, 1.0))
    return State(r, s, tau)


@dataclass(frozen=True)
class OrbitTrace:
    base: PlanarPoint
    n0: int
    n1: int
    points: np.ndarray  # (n1 - n0 + 1, 2), row i is the image at step n0 + i
    forward: bool = True

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.n0, self.n1 + 1)

    @property
    def last(self) -> PlanarPoint:
        return PlanarPoint(*self.points[-1])

    def __len__(self):
        return len(self.points)


class MapExpr:
    """Immutable node of a map expression."""

    kind = "abstract"
    domain = SQUARE
    codomain = SQUARE
    homeomorphism = True
    preserves_boundary = True
    lipschitz_bound: float | None = None

    # -- node protocol ----------------------------------------------------
    def _fwd(self, st: State) -> State:
        raise NotImplementedError

    def _inv(self, st: State) -> State:
        raise NotInvertibleError(self)

    def exceptional_mask(self, st: State) -> np.ndarray | None:
        """Points where ``_inv`` is multivalued; conjugation fixes them."""
        return None

    def _power(self, st: State, k: int) -> State:
        step = self._fwd if k >= 0 else self._inv
        for i in range(abs(k)):
            try:
                st = step(st)
            except StepError:
                raise
            except Exception as exc:
                raise StepError((i + 1) * (1 if k >= 0 else -1), exc) from exc
        return st

    def _orbit(self, st: State, n0: int, n1: int, sign: int = 1):
        """Arrays (R, S, T) of shape (n1 - n0 + 1, N) for steps n0..n1 of m ** sign.

        Each step applies the map (or its inverse) to the previous point, so a
        backward orbit never has to be recovered from a forward one.
        """
        st = self._power(st, sign * n0)
        step = self._fwd if sign > 0 else self._inv
        n = n1 - n0 + 1
        R = np.empty((n, len(st)))
        S = np.empty_like(R)
        T = np.empty_like(R)
        for i in range(n):
            if i:
                try:
                    st = step(st)
                except Exception as exc:
                    raise StepError(sign * (n0 + i), exc) from exc
            R[i], S[i], T[i] = st.r, st.s, st.tau
        return R, S, T

    def embed(self, R, S) -> np.ndarray:
        """Metric coordinates of points, shape (..., d)."""
        return np.stack([R, S], axis=-1)

    def to_dict(self) -> dict:
        raise NotImplementedError(f"{self.kind} nodes are not serializable")

    # -- sugar --------------------------------------------------------------
    def __matmul__(self, other: "MapExpr") -> "Compose":
        return Compose([self, other])

    def inverse(self) -> "MapExpr":
        return Inverse(self)

    def __repr__(self):
        return f"<{self.kind}>"


class Identity(MapExpr):
    kind = "identity"
    lipschitz_bound = 1.0

    def __init__(self, domain: str = SQUARE):
        self.domain = self.codomain = domain

    def _fwd(self, st):
        return st

    _inv = _fwd

    def _power(self, st, k):
        return st

    def to_dict(self):
        return {"kind": self.kind, "domain": self.domain}


class BaseF02(MapExpr):
    """(r, s) -> (r, f01(s))."""

    kind = "f02"
    lipschitz_bound = 2.0

    def _fwd(self, st):
        return State(st.r, *lifted_vertical_step(st, 1))

    def _inv(self, st):
        return State(st.r, *lifted_vertical_step(st, -1))

    def to_dict(self):
        return {"kind": self.kind}


def lifted_vertical_step(st: State, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Ordinate and height after one step of f01 (k = 1) or its inverse (k = -1).

    Exact branch evaluation of f01 except for a step away from an edge that
    starts within ``EDGE_LIFT`` of it: there the ordinate carries almost no
    relative precision (or has rounded onto the edge), and is rebuilt from the
    height instead.
    """
    tau = st.tau + k
    s = f01_eval(st.s) if k > 0 else f01_inverse(st.s)
    edge = -1.0 if k > 0 else 1.0
    lift = (np.abs(st.s - edge) < EDGE_LIFT) & np.isfinite(st.tau)
    if np.any(lift):
        s = np.where(lift, from_height(np.where(lift, tau, 0.0)), s)
    return s, tau


EDGE_LIFT = 2.0 ** -20


class Inverse(MapExpr):
    kind = "inverse"

    def __init__(self, child: MapExpr):
        self.child = child
        self.domain, self.codomain = child.codomain, child.domain
        self.homeomorphism = child.homeomorphism
        self.preserves_boundary = child.preserves_boundary
        self.lipschitz_bound = child.lipschitz_bound

    def _fwd(self, st):
        return self.child._inv(st)

    def _inv(self, st):
        return self.child._fwd(st)

    def _power(self, st, k):
        return self.child._power(st, -k)

    def _orbit(self, st, n0, n1, sign=1):
        return self.child._orbit(st, n0, n1, -sign)

    def inverse(self):
        return self.child

    def embed(self, R, S):
        return self.child.embed(R, S)

    def to_dict(self):
        return {"kind": self.kind, "child": self.child.to_dict()}

    def __repr__(self):
        return f"Inverse({self.child!r})"


class Compose(MapExpr):
    """maps[0] o maps[1] o ... (rightmost applied first)."""

    kind = "compose"

    def __init__(self, maps: Sequence[MapExpr]):
        maps = list(maps)
        if not maps:
            raise InvalidInputError("empty composition; use Identity")
        for a, b in zip(maps, maps[1:]):
            if a.domain != b.codomain:
                raise InvalidInputError(f"cannot compose {a!r} after {b!r}")
        self.maps = tuple(maps)
        self.domain, self.codomain = maps[-1].domain, maps[0].codomain
        self.homeomorphism = all(m.homeomorphism for m in maps)
        self.preserves_boundary = all(m.preserves_boundary for m in maps)
        bounds = [m.lipschitz_bound for m in maps]
        self.lipschitz_bound = (math.prod(bounds) if all(b is not None for b in bounds)
                                else None)

    def _fwd(self, st):
        for m in reversed(self.maps):
            st = m._fwd(st)
        return st

    def _inv(self, st):
        for m in self.maps:
            st = m._inv(st)
        return st

    def embed(self, R, S):
        return self.maps[0].embed(R, S)

    def to_dict(self):
        return {"kind": self.kind, "maps": [m.to_dict() for m in self.maps]}

    def __repr__(self):
        return "Compose(" + ", ".join(repr(m) for m in self.maps) + ")"


class Power(MapExpr):
    kind = "power"

    def __init__(self, child: MapExpr, k: int):
        self.child, self.k = child, int(k)
        self.domain, self.codomain = child.domain, child.codomain
        self.homeomorphism = child.homeomorphism
        self.preserves_boundary = child.preserves_boundary
        b = child.lipschitz_bound
        self.lipschitz_bound = None if b is None else b ** abs(self.k)

    def _fwd(self, st):
        return self.child._power(st, self.k)

    def _inv(self, st):
        return self.child._power(st, -self.k)

    def _power(self, st, k):
        return self.child._power(st, k * self.k)

    def _orbit(self, st, n0, n1, sign=1):
        if self.k == 0:
            return super()._orbit(st, n0, n1, sign)
        a = abs(self.k)
        R, S, T = self.child._orbit(st, n0 * a, n1 * a, sign * (1 if self.k > 0 else -1))
        return R[::a], S[::a], T[::a]

    def embed(self, R, S):
        return self.child.embed(R, S)

    def to_dict(self):
        return {"kind": self.kind, "k": self.k, "child": self.child.to_dict()}

    def __repr__(self):
        return f"Power({self.child!r}, {self.k})"


class Conjugate(MapExpr):
    """outer o inner o outer^-1, with powers routed as outer o inner^k o outer^-1."""

    kind = "conjugate"

    def __init__(self, outer: MapExpr, inner: MapExpr):
        if outer.domain != inner.codomain or inner.domain != inner.codomain:
            raise InvalidInputError("conjugation needs inner: X -> X and outer: X -> Y")
        self.outer, self.inner = outer, inner
        self.domain = self.codomain = outer.codomain
        self.homeomorphism = inner.homeomorphism
        self.preserves_boundary = inner.preserves_boundary

    def _route(self, st, k):
        fixed = self.outer.exceptional_mask(st)
        if fixed is None or not np.any(fixed):
            return self.outer._fwd(self.inner._power(self.outer._inv(st), k))
        free = np.flatnonzero(~fixed)
        if len(free) == 0:
            return st
        sub = st.take(free)
        out = self.outer._fwd(self.inner._power(self.outer._inv(sub), k))
        return st.put(free, out)

    def _fwd(self, st):
        return self._route(st, 1)

    def _inv(self, st):
        return self._route(st, -1)

    def _power(self, st, k):
        return self._route(st, k)

    def exceptional_mask(self, st):
        return None

    def _orbit(self, st, n0, n1, sign=1):
        n = n1 - n0 + 1
        R = np.repeat(st.r[None, :], n, axis=0)
        S = np.repeat(st.s[None, :], n, axis=0)
        T = np.repeat(st.tau[None, :], n, axis=0)
        fixed = self.outer.exceptional_mask(st)
        free = np.arange(len(st)) if fixed is None else np.flatnonzero(~fixed)
        if len(free) == 0:
            return R, S, T
        z = self.outer._inv(st.take(free))
        Ri, Si, Ti = self.inner._orbit(z, n0, n1, sign)
        out = _apply_unique(self.outer, State(Ri.ravel(), Si.ravel(), Ti.ravel()))
        shape = Ri.shape
        R[:, free] = out.r.reshape(shape)
        S[:, free] = out.s.reshape(shape)
        T[:, free] = out.tau.reshape(shape)
        return R, S, T

    def embed(self, R, S):
        return self.outer.embed(R, S)

    def to_dict(self):
        return {"kind": self.kind, "outer": self.outer.to_dict(), "inner": self.inner.to_dict()}

    def __repr__(self):
        return f"Conjugate({self.outer!r}, {self.inner!r})"


def _apply_unique(m: MapExpr, st: State) -> State:
    # converged orbit tails repeat the same point many times
    key = np.column_stack([st.r, st.s, st.tau])
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    if len(uniq) > 0.8 * len(key):
        return m._fwd(st)
    out = m._fwd(State(uniq[:, 0].copy(), uniq[:, 1].copy(), uniq[:, 2].copy()))
    inv = inv.ravel()
    return State(out.r[inv], out.s[inv], out.tau[inv])


class TangentChart(MapExpr):
    """H(r, s) = (tan(r pi / 2), tan(s pi / 2)) from the open square onto the plane."""

    kind = "tangent_chart"
    domain, codomain = SQUARE, PLANE
    preserves_boundary = False

    def _fwd(self, st):
        if np.any(np.abs(st.r) >= 1.0) or np.any(np.abs(st.s) >= 1.0) & ~np.isfinite(st.tau).any():
            raise DomainError("the tangent chart is defined on the open square only")
        # the ordinate goes through its edge distance, rebuilt from the height
        # where one is carried, so orbits creeping to an edge stay finite
        gap = np.where(np.isfinite(st.tau), edge_gap(st.tau), 1.0 - np.abs(st.s))
        if np.any(gap <= 0.0):
            raise DomainError("the tangent chart is defined on the open square only")
        x = np.tan(st.r * np.pi / 2)
        with np.errstate(divide="ignore"):
            near = np.where(st.s >= 0.0, 1.0, -1.0) / np.tan(gap * np.pi / 2)
        y = np.where(gap < 0.5, near, np.tan(st.s * np.pi / 2))
        return State(x, y, st.tau)

    def _inv(self, st):
        r = np.arctan(st.r) * 2 / np.pi
        with np.errstate(divide="ignore"):
            gap = np.arctan(1.0 / np.abs(st.s)) * 2 / np.pi
        up = st.s >= 0.0
        s = np.where(up, 1.0 - gap, gap - 1.0)
        return State(r, s, height_from_gap(gap, up))

    def to_dict(self):
        return {"kind": self.kind}


class AnnulusRotation(MapExpr):
    """(x, y) -> (x + y mod 1, y) on the annulus S^1 x [0, 1].

    Points are (angle fraction x in [0, 1), height y in [0, 1]); distances are
    measured after embedding as (cos 2 pi x, sin 2 pi x, y).
    """

    kind = "annulus_rotation"
    domain = codomain = ANNULUS
    lipschitz_bound = None

    def _fwd(self, st):
        return State(np.mod(st.r + st.s, 1.0), st.s, st.tau)

    def _inv(self, st):
        return State(np.mod(st.r - st.s, 1.0), st.s, st.tau)

    def _power(self, st, k):
        return State(np.mod(st.r + k * st.s, 1.0), st.s, st.tau)

    def embed(self, R, S):
        th = 2 * np.pi * np.asarray(R)
        return np.stack([np.cos(th), np.sin(th), np.asarray(S)], axis=-1)

    def to_dict(self):
        return {"kind": self.kind}


# -- public evaluation API ----------------------------------------------------

def _check_points(m: MapExpr, P, space: str | None = None) -> State:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    space = space or m.domain
    if space == ANNULUS:
        if np.any(P[:, 1] < 0) or np.any(P[:, 1] > 1):
            raise DomainError("annulus heights must lie in [0, 1]")
    st = State.from_points(P, space)
    if space == PLANE:
        # plane points carry the height of their square preimage
        st = State(st.r, st.s, TangentChart()._inv(st).tau)
    return st


def forward(m: MapExpr, P) -> np.ndarray:
    """Forward images of an (N, 2) batch."""
    return m._fwd(_check_points(m, P)).points


def inverse(m: MapExpr, P) -> np.ndarray:
    return m._inv(_check_points(m, P, m.codomain)).points


def power(m: MapExpr, P, k: int) -> np.ndarray:
    return m._power(_check_points(m, P), int(k)).points


def eval_forward(m: MapExpr, x) -> PlanarPoint:
    return PlanarPoint(*forward(m, [tuple(x)])[0])


def eval_inverse(m: MapExpr, x) -> PlanarPoint:
    return PlanarPoint(*inverse(m, [tuple(x)])[0])


def orbit_arrays(m: MapExpr, P, n0: int, n1: int) -> np.ndarray:
    """Orbit points of a batch: array (n1 - n0 + 1, N, 2)."""
    if n0 > n1:
        raise InvalidInputError(f"empty step range [{n0}, {n1}]")
    R, S, _ = m._orbit(_check_points(m, P), int(n0), int(n1))
    return np.stack([R, S], axis=-1)


def orbit(m: MapExpr, x, n0: int, n1: int, forward: bool = True) -> OrbitTrace:
    x = PlanarPoint(*x)
    if forward:
        pts = orbit_arrays(m, [tuple(x)], n0, n1)[:, 0, :]
    else:
        pts = orbit_arrays(Inverse(m), [tuple(x)], n0, n1)[:, 0, :]
    return OrbitTrace(x, int(n0), int(n1), pts, forward)


def bilipschitz_estimate(m: MapExpr, samples: int, seed: int, region=None) -> float:
    """Empirical max distortion over random pairs; a lower bound on the true constant.

    Half of the pairs are global, half are close pairs (separation spread over
    several decades) so local stretching is seen. ``region`` = (rlo, rhi, slo, shi)
    restricts the first point of each pair.
    """
    if samples <= 0:
        raise InvalidInputError("samples must be positive")
    rng = np.random.default_rng(seed)
    lo_r, hi_r, lo_s, hi_s = region or (-1.0, 1.0, -1.0, 1.0)
    A = np.column_stack([rng.uniform(lo_r, hi_r, samples), rng.uniform(lo_s, hi_s, samples)])
    B = np.column_stack([rng.uniform(lo_r, hi_r, samples), rng.uniform(lo_s, hi_s, samples)])
    half = samples // 2
    ang = rng.uniform(0, 2 * np.pi, half)
    rad = 10.0 ** rng.uniform(-4, -1, half)
    B[:half] = A[:half] + rad[:, None] * np.column_stack([np.cos(ang), np.sin(ang)])
    B = np.clip(B, -1.0, 1.0)
    d0 = np.linalg.norm(A - B, axis=1)
    keep = d0 > 0
    A, B, d0 = A[keep], B[keep], d0[keep]
    fa, fb = forward(m, A), forward(m, B)
    d1 = np.linalg.norm(fa - fb, axis=1)
    with np.errstate(divide="ignore"):
        ratio = np.maximum(d1 / d0, d0 / d1)
    if len(ratio) == 0:
        return 1.0
    return float(max(1.0, np.max(ratio)))


# -- serialization --------------------------------------------------------------

_DECODERS: dict[str, Callable] = {}


def register_kind(kind: str, decoder: Callable) -> None:
    _DECODERS[kind] = decoder


def to_document(m: MapExpr) -> dict:
    return {"format": "squarelimits.mapexpr", "version": 1, "root": m.to_dict()}


def from_document(doc: dict, resolver=None) -> MapExpr:
    """Rebuild an expression; ``resolver(ref)`` loads objects stored by reference."""
    if doc.get("format") != "squarelimits.mapexpr":
        raise InvalidInputError("not a map expression document")
    return decode_node(doc["root"], resolver)


def decode_node(d: dict, resolver=None) -> MapExpr:
    kind = d["kind"]
    if kind == "identity":
        return Identity(d.get("domain", SQUARE))
    if kind == "f02":
        return BaseF02()
    if kind == "inverse":
        return Inverse(decode_node(d["child"], resolver))
    if kind == "compose":
        return Compose([decode_node(x, resolver) for x in d["maps"]])
    if kind == "power":
        return Power(decode_node(d["child"], resolver), d["k"])
    if kind == "conjugate":
        return Conjugate(decode_node(d["outer"], resolver), decode_node(d["inner"], resolver))
    if kind == "tangent_chart":
        return TangentChart()
    if kind == "annulus_rotation":
        return AnnulusRotation()
    if kind in _DECODERS:
        return _DECODERS[kind](d, resolver)
    raise InvalidInputError(f"unknown map node kind '{kind}'")
