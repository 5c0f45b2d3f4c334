"""Numerical dynamics: limit-set estimates, sensitivity certificates, fixed-point and entropy checks."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInputError
from .geometry import PlanarPoint, PointCloud, hausdorff_distance, min_set_distance
from .map_algebra import ANNULUS, Inverse, MapExpr, forward, orbit_arrays

log = logging.getLogger(__name__)

OMEGA, ALPHA = "omega", "alpha"
DIRECTIONS = (OMEGA, ALPHA)
DEFAULT_N0, DEFAULT_N1 = 500, 2000
FIXED_TOL = 1e-9


def _directed(m: MapExpr, direction: str) -> MapExpr:
    if direction == OMEGA:
        return m
    if direction == ALPHA:
        return Inverse(m)
    raise InvalidInputError(f"direction must be '{OMEGA}' or '{ALPHA}', got {direction!r}")


# -- limit sets ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LimitSetEstimate:
    base: PlanarPoint
    direction: str
    N0: int
    N1: int
    cloud: PointCloud          # orbit tail in map coordinates
    metric: np.ndarray         # the same points in metric coordinates
    diagnostic: float          # Hausdorff distance between the two half windows

    def distance_to(self, other: "LimitSetEstimate") -> float:
        return min_set_distance(self.metric, other.metric)

    def hausdorff_to(self, pts) -> float:
        return hausdorff_distance(self.metric, np.asarray(pts, float))

    def to_rows(self):
        return [(k, float(p[0]), float(p[1])) for k, p in
                zip(range(self.N0 + 1, self.N0 + self.N1 + 1), self.cloud.points)]


def limit_tails(m: MapExpr, P, direction: str = OMEGA, N0: int = DEFAULT_N0,
                N1: int = DEFAULT_N1) -> np.ndarray:
    """Orbit tails of a batch, steps N0+1 .. N0+N1: array (N1, len(P), 2)."""
    if N0 <= 0 or N1 <= 0:
        raise InvalidInputError("N0 and N1 must be positive")
    return orbit_arrays(_directed(m, direction), P, N0 + 1, N0 + N1)


def _estimate_from_tail(m, x, direction, N0, N1, tail) -> LimitSetEstimate:
    metric = m.embed(tail[:, 0], tail[:, 1])
    half = N1 // 2
    diag = hausdorff_distance(metric[:half], metric[half:]) if half else 0.0
    return LimitSetEstimate(PlanarPoint(*x), direction, int(N0), int(N1), PointCloud(tail.copy()),
                            metric, float(diag))


def estimate_limit_set(m: MapExpr, x, direction: str = OMEGA, N0: int = DEFAULT_N0,
                       N1: int = DEFAULT_N1) -> LimitSetEstimate:
    x = tuple(map(float, x))
    tail = limit_tails(m, [x], direction, N0, N1)[:, 0, :]
    return _estimate_from_tail(m, x, direction, N0, N1, tail)


def estimate_limit_sets(m: MapExpr, P, direction: str = OMEGA, N0: int = DEFAULT_N0,
                        N1: int = DEFAULT_N1) -> list[LimitSetEstimate]:
    P = np.atleast_2d(np.asarray(P, float))
    tails = limit_tails(m, P, direction, N0, N1)
    return [_estimate_from_tail(m, P[i], direction, N0, N1, tails[:, i, :]) for i in range(len(P))]


def limit_transport_discrepancy(psi: MapExpr, phi: MapExpr, xi: MapExpr, P, N0: int = DEFAULT_N0,
                                N1: int = DEFAULT_N1, direction: str = OMEGA) -> np.ndarray:
    """Hausdorff distance between the limit estimate of psi at xi(x) and xi of phi's, per point."""
    P = np.atleast_2d(np.asarray(P, float))
    lhs = limit_tails(psi, forward(xi, P), direction, N0, N1)
    rhs = limit_tails(phi, P, direction, N0, N1)
    out = np.empty(len(P))
    for i in range(len(P)):
        img = forward(xi, rhs[:, i, :])
        out[i] = hausdorff_distance(lhs[:, i, :], img)
    return out


# -- sensitivity ---------------------------------------------------------------------

def _thin(cloud: np.ndarray, voxel: float) -> np.ndarray:
    """One representative per voxel; min-set distances move by at most the voxel diagonal."""
    key = np.floor(cloud / voxel).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    return cloud[np.sort(idx)]


class _CloudSet:
    def __init__(self, clouds: Sequence[np.ndarray], voxel: float):
        self.thin = [_thin(c, voxel) for c in clouds]
        self.trees = [cKDTree(t) for t in self.thin]

    def dist(self, i: int, j: int) -> float:
        a, b = (i, j) if len(self.thin[i]) <= len(self.thin[j]) else (j, i)
        return float(self.trees[b].query(self.thin[a], k=1)[0].min())


def _farthest_point(cs: _CloudSet, n: int, starts: Sequence[int]) -> tuple[list, float]:
    """Greedy max-min dispersion selection of n clouds, best over several starts."""
    N = len(cs.thin)
    best, best_sep = [], -1.0
    for s0 in starts:
        chosen = [s0]
        dmin = np.array([cs.dist(s0, j) if j != s0 else -np.inf for j in range(N)])
        while len(chosen) < n:
            j = int(np.argmax(dmin))
            if dmin[j] == -np.inf:
                break
            chosen.append(j)
            dj = np.array([cs.dist(j, k) if k not in chosen else -np.inf for k in range(N)])
            dmin = np.minimum(dmin, dj)
        if len(chosen) < n:
            continue
        sep = min(cs.dist(a, b) for i, a in enumerate(chosen) for b in chosen[i + 1:])
        if sep > best_sep:
            best, best_sep = chosen, sep
    return best, best_sep


@dataclass
class CenterResult:
    center: tuple
    witnesses: np.ndarray                       # (n, 2) points in the neighbourhood
    separations: dict                           # direction -> (n, n) min-set distances
    best: dict                                  # direction -> min pairwise separation achieved
    passed: bool


@dataclass
class SensitivityCertificate:
    n: int
    c: float
    radius: float
    directions: tuple
    N0: int
    N1: int
    centers: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.centers) and all(r.passed for r in self.centers)

    def worst(self) -> CenterResult:
        return min(self.centers, key=lambda r: min(r.best.values()))

    def failure_report(self) -> str | None:
        if self.passed:
            return None
        w = self.worst()
        return (f"worst center {tuple(round(v, 6) for v in w.center)}: best separation "
                + ", ".join(f"{d} {w.best[d]:.4g}" for d in self.directions) + f" < c = {self.c:.4g}")

    def to_dict(self) -> dict:
        return {"n": self.n, "c": self.c, "radius": self.radius, "directions": list(self.directions),
                "N0": self.N0, "N1": self.N1, "passed": self.passed,
                "centers": [{"center": list(r.center), "passed": r.passed,
                             "best": {d: float(v) for d, v in r.best.items()},
                             "witnesses": r.witnesses.tolist(),
                             "separations": {d: np.asarray(v).tolist() for d, v in r.separations.items()}}
                            for r in self.centers]}


def ball_samples(m: MapExpr, center, radius: float, count: int, rng) -> np.ndarray:
    """Uniform samples of the metric ball around ``center``, clipped to the domain."""
    center = np.asarray(center, float)
    ang = rng.uniform(0, 2 * np.pi, count)
    rad = radius * np.sqrt(rng.uniform(0, 1, count))
    off = rad[:, None] * np.column_stack([np.cos(ang), np.sin(ang)])
    if m.domain == ANNULUS:
        # an angle step dx moves 2 pi dx along the circle; chords are shorter than arcs
        P = center + off * np.array([1 / (2 * np.pi), 1.0])
        P[:, 0] = np.mod(P[:, 0], 1.0)
        bad = (P[:, 1] < 0) | (P[:, 1] > 1)
        if np.any(bad):
            log.warning("neighbourhood of %s leaves the annulus; clipped", tuple(center))
        P[:, 1] = np.clip(P[:, 1], 0.0, 1.0)
        return P
    P = center + off
    if np.any(np.abs(P) > 1):
        log.warning("neighbourhood of %s leaves the square; clipped", tuple(center))
        P = np.clip(P, -1.0, 1.0)
    return P


def witness_search(m: MapExpr, n: int, c: float, P, directions=DIRECTIONS, N0: int = DEFAULT_N0,
                   N1: int = DEFAULT_N1, starts: int = 4, center=None) -> CenterResult:
    """Look among the points P for n whose limit estimates are pairwise at least c apart.

    Each direction is searched separately; the witnesses reported are those of
    the first direction when they differ. Separations of the selected sets are
    recomputed on the full clouds.
    """
    if n < 2 or not c > 0:
        raise InvalidInputError("need n >= 2 and c > 0")
    P = np.atleast_2d(np.asarray(P, float))
    voxel = min(c / 50, 1e-3)
    wit, seps, best = None, {}, {}
    for d in directions:
        tails = limit_tails(m, P, d, N0, N1)
        clouds = [m.embed(tails[:, i, 0], tails[:, i, 1]) for i in range(len(P))]
        cs = _CloudSet(clouds, voxel)
        chosen, _ = _farthest_point(cs, n, list(range(min(starts, len(P)))))
        S = np.zeros((n, n))
        for a in range(len(chosen)):
            for b in range(a + 1, len(chosen)):
                S[a, b] = S[b, a] = min_set_distance(clouds[chosen[a]], clouds[chosen[b]])
        off = S[np.triu_indices(n, 1)]
        best[d] = float(off.min()) if len(chosen) == n else 0.0
        seps[d] = S
        if wit is None:
            wit = P[chosen]
    return CenterResult(tuple(map(float, P.mean(axis=0) if center is None else center)), wit, seps, best,
                        all(best[d] >= c for d in directions))


def center_grid(m: MapExpr, k: int = 5, margin: float = 0.1) -> np.ndarray:
    """k x k centres spread over the domain, away from its edges by ``margin``."""
    if m.domain == ANNULUS:
        xs = (np.arange(k) + 0.5) / k
        ys = np.linspace(margin, 1 - margin, k)
    else:
        xs = ys = np.linspace(-1 + margin, 1 - margin, k)
    return np.array([(x, y) for y in ys for x in xs])


def sensitivity_certificate(m: MapExpr, n: int, c: float, centers, radius: float,
                            directions=DIRECTIONS, samples: int = 200, seed: int = 0,
                            N0: int = DEFAULT_N0, N1: int = DEFAULT_N1,
                            stop_on_failure: bool = False) -> SensitivityCertificate:
    if n < 2 or not c > 0 or not radius > 0 or samples < n:
        raise InvalidInputError("need n >= 2, c > 0, radius > 0 and samples >= n")
    dirs = tuple(directions)
    for d in dirs:
        _directed(m, d)
    cert = SensitivityCertificate(n, float(c), float(radius), dirs, int(N0), int(N1))
    for i, ctr in enumerate(np.atleast_2d(np.asarray(centers, float))):
        rng = np.random.default_rng([seed, i])
        P = ball_samples(m, ctr, radius, samples, rng)
        res = witness_search(m, n, c, P, dirs, N0, N1, center=ctr)
        cert.centers.append(res)
        log.info("center %s: best %s", tuple(ctr), res.best)
        if stop_on_failure and not res.passed:
            break
    return cert


def replay_certificate(m: MapExpr, cert: SensitivityCertificate) -> bool:
    """Recompute the witnesses' limit estimates and confirm the stored separations."""
    for r in cert.centers:
        if not r.passed:
            continue
        for d in cert.directions:
            ests = estimate_limit_sets(m, r.witnesses, d, cert.N0, cert.N1)
            for a in range(len(ests)):
                for b in range(a + 1, len(ests)):
                    if ests[a].distance_to(ests[b]) < cert.c:
                        return False
    return True


# -- nonwandering and entropy -----------------------------------------------------------

@dataclass
class FixedCheck:
    count: int
    max_displacement: float
    non_fixed: np.ndarray
    passed: bool

    def to_dict(self):
        return {"count": self.count, "max_displacement": self.max_displacement,
                "non_fixed": self.non_fixed.tolist(), "passed": self.passed}


def nonwandering_fixed_check(m: MapExpr, candidates, tol: float = FIXED_TOL) -> FixedCheck:
    P = np.atleast_2d(np.asarray(candidates.points if isinstance(candidates, PointCloud) else candidates,
                                 float))
    img = forward(m, P)
    d = np.linalg.norm(m.embed(img[:, 0], img[:, 1]) - m.embed(P[:, 0], P[:, 1]), axis=1)
    bad = d > tol
    return FixedCheck(len(P), float(d.max()) if len(d) else 0.0, P[bad], not bool(np.any(bad)))


@dataclass
class EntropyEstimate:
    eps: float
    n_max: int
    grid: int
    counts: np.ndarray          # separated-set cardinality for n = 1 .. n_max
    slope: float                # least squares over n = 1 .. n_max
    tail_slope: float           # the same over the second half, past the separation transient
    label: str = "heuristic separated-set growth (not an entropy computation)"

    def to_dict(self):
        return {"eps": self.eps, "n_max": self.n_max, "grid": self.grid, "counts": self.counts.tolist(),
                "slope": self.slope, "tail_slope": self.tail_slope, "label": self.label}


def _greedy_separated(O: np.ndarray, eps: float) -> np.ndarray:
    """Greedy (n, eps)-separated subset sizes for every prefix length n.

    O has shape (n_max, N, d). Two points are separated at length n when their
    orbits differ by more than eps at some step below n. Separated points stay
    separated for longer n, so for each n the greedy pass only has to compare a
    candidate with selected points within eps of it at step 0.
    """
    n_max, N, _ = O.shape
    X0 = O[0]
    tree = cKDTree(X0)
    near = tree.query_ball_point(X0, eps)
    counts = np.zeros(n_max, dtype=np.int64)
    # running Bowen distances to close neighbours, updated step by step
    pairs_i = np.repeat(np.arange(N), [len(v) for v in near])
    pairs_j = np.concatenate([np.asarray(v, dtype=np.int64) for v in near])
    keep = pairs_i != pairs_j
    pairs_i, pairs_j = pairs_i[keep], pairs_j[keep]
    bowen = np.zeros(len(pairs_i))
    starts = np.searchsorted(pairs_i, np.arange(N + 1))
    for n in range(n_max):
        bowen = np.maximum(bowen, np.linalg.norm(O[n, pairs_i] - O[n, pairs_j], axis=1))
        close = bowen <= eps
        selected = np.zeros(N, dtype=bool)
        for i in range(N):
            nb = pairs_j[starts[i]:starts[i + 1]][close[starts[i]:starts[i + 1]]]
            if not np.any(selected[nb]):
                selected[i] = True
        counts[n] = int(selected.sum())
    return counts


def entropy_growth_estimate(m: MapExpr, eps: float = 0.05, n_max: int = 20, grid: int = 100,
                            lo=(-1.0, -1.0), hi=(1.0, 1.0)) -> EntropyEstimate:
    """Least-squares slope of log(greedy separated-set size) against n on grid orbits.

    A heuristic trend indicator only: zero entropy is consistent with a slope
    near zero, and a positive slope is not proof of positive entropy.
    """
    if grid < 2 or n_max < 2 or not eps > 0:
        raise InvalidInputError("need grid >= 2, n_max >= 2 and eps > 0")
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    pitch = float(np.max((hi - lo) / grid))
    if eps < 2 * pitch:
        raise InvalidInputError(f"eps = {eps} is below twice the grid pitch {pitch}")
    g = [(lo[k] + (np.arange(grid) + 0.5) * (hi[k] - lo[k]) / grid) for k in range(2)]
    P = np.column_stack([np.tile(g[0], grid), np.repeat(g[1], grid)])
    O = orbit_arrays(m, P, 0, n_max - 1)
    M = m.embed(O[..., 0], O[..., 1])
    counts = _greedy_separated(M, eps)
    n = np.arange(1, n_max + 1)
    logc = np.log(counts)
    slope = float(np.polyfit(n, logc, 1)[0])
    half = n_max // 2
    tail = float(np.polyfit(n[half:], logc[half:], 1)[0])
    return EntropyEstimate(float(eps), int(n_max), int(grid), counts, slope, tail)
