"""Bi-Lipschitz steering of enumerated points into target families.

The steering map is a finite composition of cone bumps. Stage k takes the
current image z of the k-th enumerated point, measures its room (distance to
the square boundary and to every earlier target), picks a target point in the
right family close enough that the bump stays within the stage's distortion
and displacement budget, and pushes z onto it. Earlier targets sit outside all
later bumps, so their images never move again.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import (DegeneracyError, EnumerationDepthError, InvalidInputError,
                     InvalidSpecError, NearSingularError)
from .geometry import distance_to_square_boundary, square_boundary_samples
from .interval_maps import from_height, height
from .map_algebra import (Compose, Identity, MapExpr, State, bilipschitz_estimate, forward,
                          moved_state, register_kind)
from .rising import BandLayout, CombBands, phase_and_clock

log = logging.getLogger(__name__)

SCAN_CAP = 10 ** 6


# -- budgets -------------------------------------------------------------------

@dataclass(frozen=True)
class SteeringBudget:
    """Stage budgets lambda_j = lam ** w_j and eps_j = eps * w_j for j = 1..K.

    ``geometric`` uses w_j = 2^-(j+1); ``polynomial`` uses w_j = 6 / (pi^2 j^2),
    which decays slowly enough that late stages still have usable room.
    The geometric weights sum to at most 1/2 and the polynomial ones to less
    than one, so the totals stay strictly inside the global budget in floating point.
    """

    lam: float
    eps: float
    K: int = 64
    schedule: str = "geometric"

    def __post_init__(self):
        if not self.lam > 1 or not self.eps > 0 or self.K < 0:
            raise InvalidSpecError("budget needs lam > 1, eps > 0, K >= 0")
        if self.schedule not in ("geometric", "polynomial"):
            raise InvalidSpecError(f"unknown schedule {self.schedule!r}")

    @property
    def weights(self) -> np.ndarray:
        j = np.arange(1, self.K + 1, dtype=float)
        if self.schedule == "geometric":
            return 2.0 ** -(j + 1)
        return 6.0 / (math.pi ** 2 * j ** 2)

    @property
    def lambdas(self) -> np.ndarray:
        return self.lam ** self.weights

    @property
    def epsilons(self) -> np.ndarray:
        return self.eps * self.weights

    @property
    def mu(self) -> np.ndarray:
        """Running products of the stage distortions."""
        return self.lam ** np.cumsum(self.weights)

    @property
    def delta(self) -> np.ndarray:
        """Running sums of the stage displacements."""
        return np.cumsum(self.epsilons)

    def check(self) -> None:
        lam, eps = self.lambdas, self.epsilons
        if self.K and not (self.mu[-1] < self.lam and self.delta[-1] < self.eps):
            raise InvalidSpecError("stage budgets exceed the global budget")
        if np.any(np.diff(lam) >= 0) or np.any(np.diff(eps) >= 0) or np.any(lam <= 1):
            raise InvalidSpecError("stage budgets must strictly decrease")

    @property
    def residual(self) -> float:
        return float(self.eps - (self.delta[-1] if self.K else 0.0))

    def to_dict(self):
        return {"lam": self.lam, "eps": self.eps, "K": self.K, "schedule": self.schedule}


# -- enumerations ----------------------------------------------------------------

class PointEnumeration:
    """Families of distinct points, each enumerated in a fixed order.

    The global enumeration visits families round-robin: entry k is item
    k // m of family k mod m (exhausted finite families are skipped).
    """

    m: int

    def family(self, n: int, count: int, start: int = 0) -> np.ndarray:
        raise NotImplementedError

    def family_size(self, n: int) -> float:
        return math.inf

    def chi(self, count: int) -> list[tuple[np.ndarray, int, int]]:
        """First ``count`` entries of the global enumeration as (point, family, index)."""
        out, i = [], 0
        sizes = [self.family_size(n) for n in range(self.m)]
        if all(s == 0 for s in sizes):
            return out
        while len(out) < count:
            for n in range(self.m):
                if i < sizes[n] and len(out) < count:
                    out.append((self.family(n, 1, i)[0], n, i))
            i += 1
            if all(i >= s for s in sizes):
                break
        return out

    def label(self, k: int) -> int:
        return self.chi(k + 1)[k][1]

    def find(self, n: int, z: np.ndarray, bound: float, depth: int = SCAN_CAP):
        """First enumerated point of family n within ``bound`` of z (strictly)."""
        chunk = 4096
        start = 0
        while start < min(depth, self.family_size(n)):
            cnt = int(min(chunk, depth - start, self.family_size(n) - start))
            P = self.family(n, cnt, start)
            d = np.linalg.norm(P - z, axis=1)
            hit = np.flatnonzero(d < bound)
            if len(hit):
                return P[hit[0]], start + int(hit[0])
            start += cnt
            chunk = min(chunk * 2, 1 << 17)
        raise EnumerationDepthError(
            f"no point of family {n} within {bound:.3g} of {tuple(np.round(z, 6))} in the first "
            f"{start} entries; the enumeration needs density finer than {bound:.3g} there")

    def contains(self, n: int, y, depth: int = SCAN_CAP) -> bool:
        y = np.asarray(y, dtype=float)
        try:
            p, _ = self.find(n, y, 1e-300, depth)
        except EnumerationDepthError:
            return False
        return bool(np.all(p == y))


class ExplicitEnumeration(PointEnumeration):
    def __init__(self, families: Sequence[Sequence[Sequence[float]]]):
        self.families = [np.asarray(f, dtype=float).reshape(-1, 2) for f in families]
        self.m = len(self.families)

    def family(self, n, count, start=0):
        return self.families[n][start:start + count]

    def family_size(self, n):
        return len(self.families[n])


class HaltonEnumeration(PointEnumeration):
    """Scrambled Halton points in the open square, one independently scrambled stream per family.

    Dealing a single stream by index mod m would correlate the families with
    the low digits of the radical inverse (for m = 2 each family would sit in
    one half of the square), so every family gets its own scramble.
    """

    def __init__(self, m: int, seed: int):
        if m < 1:
            raise InvalidInputError("need at least one family")
        self.m, self.seed = m, int(seed)
        # the scramble depends on the requested size, so each engine is kept and extended
        self._engines = [qmc.Halton(d=2, scramble=True, seed=np.random.default_rng(ss))
                         for ss in np.random.SeedSequence(self.seed).spawn(m)]
        self._cache = [np.empty((0, 2)) for _ in range(m)]

    def _prefix(self, n: int, count: int) -> np.ndarray:
        have = len(self._cache[n])
        if have < count:
            more = max(count, 2 * have, 1024) - have
            self._cache[n] = np.vstack([self._cache[n], 2.0 * self._engines[n].random(more) - 1.0])
        return self._cache[n]

    def family(self, n, count, start=0):
        return self._prefix(n, start + count)[start:start + count]


class MappedEnumeration(PointEnumeration):
    """Image of another enumeration under a partial map; failures are skipped and logged."""

    def __init__(self, base: PointEnumeration, fn: Callable[[np.ndarray], np.ndarray],
                 skip: tuple = (NearSingularError,)):
        self.base, self.fn, self.skip = base, fn, skip
        self.m = base.m
        self._pts = [np.empty((0, 2)) for _ in range(self.m)]
        self._src = [np.empty(0, dtype=int) for _ in range(self.m)]
        self._scanned = [0] * self.m
        self.skipped: list[tuple[int, int]] = []

    def _fill(self, n, need):
        while len(self._pts[n]) < need and self._scanned[n] < self.base.family_size(n):
            cnt = int(min(max(64, need - len(self._pts[n])),
                          self.base.family_size(n) - self._scanned[n]))
            P = self.base.family(n, cnt, self._scanned[n])
            for j, p in enumerate(P):
                idx = self._scanned[n] + j
                try:
                    q = np.asarray(self.fn(p[None, :]), dtype=float)[0]
                except self.skip as exc:
                    log.info("skipping family %d entry %d: %s", n, idx, exc)
                    self.skipped.append((n, idx))
                    continue
                self._pts[n] = np.vstack([self._pts[n], q])
                self._src[n] = np.append(self._src[n], idx)
            self._scanned[n] += cnt

    def family(self, n, count, start=0):
        self._fill(n, start + count)
        return self._pts[n][start:start + count]

    def source_index(self, n: int, i: int) -> int:
        self._fill(n, i + 1)
        return int(self._src[n][i])

    def family_size(self, n):
        return self.base.family_size(n)


class FiberFamilies:
    """Targets = fibers whose phase lies in a band of the family.

    Family n is the union of horizontal fibers J_s with phase(height(s)) in a
    band of family n. A close member of z is found by moving vertically to the
    nearest band center of the family.
    """

    def __init__(self, layout: BandLayout):
        self.layout = layout
        self.m = layout.n_families

    def _centers_near(self, n, tau):
        phase, clock = phase_and_clock(tau)
        lay = self.layout
        if isinstance(lay, CombBands):
            m, pt = lay.n_families, lay.pitch
            g = math.floor(phase / pt)
            g0 = g - ((g - n) % m)  # family-n tooth at or below
            cands = [g0 - m, g0, g0 + m, g0 + 2 * m]
            return [clock + (gg + 0.5) * pt for gg in cands]
        cen = lay.tooth_centers(n)
        return [clock + d + cc for d in (-1.0, 0.0, 1.0) for cc in cen]

    def find(self, n: int, z: np.ndarray, bound: float, depth: int = 0):
        r, s = float(z[0]), float(z[1])
        if not -1.0 < s < 1.0:
            raise DegeneracyError("cannot steer a point on a horizontal edge")
        tau = float(height(s))
        best, bd = None, math.inf
        for tc in self._centers_near(n, tau):
            sc = float(from_height(tc))
            if -1.0 < sc < 1.0 and abs(sc - s) < bd and self.contains(n, (r, sc)):
                best, bd = sc, abs(sc - s)
        if best is None or not bd < bound:
            raise EnumerationDepthError(
                f"nearest fiber of family {n} is {bd:.3g} from {(r, s)}, bound {bound:.3g}; "
                f"the band layout needs a finer period")
        return np.array([r, best]), -1

    def contains(self, n: int, y, depth: int = 0) -> bool:
        s = float(y[1])
        if not -1.0 < s < 1.0:
            return False
        phase, _ = phase_and_clock(height(s))
        return int(self.layout.family_at(phase)) == n


# -- bumps -----------------------------------------------------------------------

class BumpMap(MapExpr):
    """Cone bump: x -> x + (1 - |x - z| / radius)_+ (y - z).

    Identity outside the open ball B(z, radius), z -> y, and with
    k = |y - z| / radius < 1 both the map and its inverse are Lipschitz with
    constants 1 + k and 1 / (1 - k).
    """

    kind = "bump"

    def __init__(self, z, y, radius: float):
        self.z = np.asarray(z, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.radius = float(radius)
        self.v = self.y - self.z
        self.d = math.hypot(*self.v)
        if not self.radius > 0:
            raise InvalidInputError("bump radius must be positive")
        if self.d >= self.radius:
            raise InvalidInputError(f"bump displacement {self.d} not below radius {self.radius}")
        k = self.d / self.radius
        self.lipschitz_bound = 1.0 / (1.0 - k) if self.d else 1.0

    def _fwd(self, st):
        if self.d == 0:
            return st
        dx, dy = st.r - self.z[0], st.s - self.z[1]
        w = 1.0 - np.hypot(dx, dy) / self.radius
        inside = w > 0
        r = np.where(inside, st.r + w * self.v[0], st.r)
        s = np.where(inside, st.s + w * self.v[1], st.s)
        hit = (st.r == self.z[0]) & (st.s == self.z[1])
        r = np.where(hit, self.y[0], r)
        s = np.where(hit, self.y[1], s)
        return moved_state(st, r, s)

    def _inv(self, st):
        if self.d == 0:
            return st
        ax = st.r - self.z[0] - self.v[0]
        ay = st.s - self.z[1] - self.v[1]
        bx, by = self.v / self.radius
        ab = ax * bx + ay * by
        a2 = ax * ax + ay * ay
        b2 = bx * bx + by * by
        rho = (ab + np.sqrt(ab * ab + (1.0 - b2) * a2)) / (1.0 - b2)
        inside = rho < self.radius
        r = np.where(inside, self.z[0] + ax + bx * rho, st.r)
        s = np.where(inside, self.z[1] + ay + by * rho, st.s)
        hit = (st.r == self.y[0]) & (st.s == self.y[1])
        r = np.where(hit, self.z[0], r)
        s = np.where(hit, self.z[1], s)
        return moved_state(st, r, s)

    def to_dict(self):
        return {"kind": self.kind, "z": self.z.tolist(), "y": self.y.tolist(), "radius": self.radius}

    def __repr__(self):
        return f"Bump(z={self.z.tolist()}, y={self.y.tolist()}, radius={self.radius:.4g})"


register_kind("bump", lambda d, resolver: BumpMap(d["z"], d["y"], d["radius"]))


def make_bump(z, y, tau: float, require_inside: bool = True) -> BumpMap:
    z, y = np.asarray(tuple(z), dtype=float), np.asarray(tuple(y), dtype=float)
    if np.linalg.norm(y - z) >= tau:
        raise InvalidInputError(f"|y - z| = {np.linalg.norm(y - z):.3g} must be below tau = {tau}")
    if require_inside and tau > float(distance_to_square_boundary(z[None, :])[0]) + 1e-15:
        raise InvalidInputError("the bump ball leaves the square")
    return BumpMap(z, y, tau)


# -- construction ----------------------------------------------------------------

@dataclass
class SteeringStage:
    k: int
    family: int
    source_index: int
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    tau: float
    bound: float
    target_index: int
    bump: BumpMap


@dataclass
class SteeringResult:
    h: MapExpr
    stages: list
    budget: SteeringBudget

    @property
    def residual(self) -> float:
        return self.budget.residual

    @property
    def bumps(self) -> list:
        return [st.bump for st in self.stages]

    def partial(self, k: int) -> MapExpr:
        """h_k: the composition of the first k bumps."""
        b = self.bumps[:k]
        return Compose(b[::-1]) if b else Identity()


def build_steering(V: PointEnumeration, W, budget: SteeringBudget,
                   scan_depth: int = SCAN_CAP) -> SteeringResult:
    budget.check()
    K = budget.K
    entries = V.chi(K)
    if len(entries) < K:
        raise EnumerationDepthError(f"V supplies only {len(entries)} of {K} points")
    lams, epss = budget.lambdas, budget.epsilons
    stages: list[SteeringStage] = []
    bumps: list[BumpMap] = []
    ys = np.empty((0, 2))
    for k in range(1, K + 1):
        x, n, i = entries[k - 1]
        st = State.from_points(x[None, :])
        for b in bumps:
            st = b._fwd(st)
        z = st.points[0]
        room = float(distance_to_square_boundary(z[None, :])[0])
        if len(ys):
            room = min(room, float(np.min(np.linalg.norm(ys - z, axis=1))))
        if room <= 0:
            raise DegeneracyError(f"stage {k}: point {tuple(z)} has no room (tau = 0)")
        lam_k, eps_k = lams[k - 1], epss[k - 1]
        bound = min(eps_k, (lam_k - 1.0) * room / lam_k)
        y, ti = W.find(n, z, bound, scan_depth)
        bump = BumpMap(z, y, room)
        bumps.append(bump)
        ys = np.vstack([ys, y])
        stages.append(SteeringStage(k, n, i, x, z, np.asarray(y), room, bound, ti, bump))
    h = Compose(bumps[::-1]) if bumps else Identity()
    return SteeringResult(h, stages, budget)


def verify_steering(h: MapExpr, V: PointEnumeration, W, K: int, budget: SteeringBudget | None = None,
                    grid: int = 100, pairs: int = 10_000, seed: int = 0,
                    stages: Sequence[SteeringStage] | None = None) -> dict:
    """Diagnostic report for a steering map."""
    entries = V.chi(K)
    X = np.array([e[0] for e in entries]).reshape(-1, 2)
    hx = forward(h, X) if len(X) else X
    member = [bool(W.contains(n, p)) for p, (_, n, _) in zip(hx, entries)]
    failed = [k + 1 for k, ok in enumerate(member) if not ok]

    B = square_boundary_samples(1000)
    hb = forward(h, B)
    boundary_exact = bool(np.array_equal(hb, B))

    g = np.linspace(-1.0, 1.0, grid)
    G = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    disp = float(np.max(np.linalg.norm(forward(h, G) - G, axis=1)))
    lam_emp = bilipschitz_estimate(h, pairs, seed)

    report = {
        "K": K,
        "membership": all(member),
        "membership_failures": failed,
        "boundary_identity": boundary_exact,
        "sup_displacement": disp,
        "empirical_lambda": lam_emp,
    }
    if budget is not None:
        report["delta_K"] = float(budget.delta[K - 1]) if K else 0.0
        report["mu_K"] = float(budget.mu[K - 1]) if K else 1.0
        report["eps"] = budget.eps
        report["lam"] = budget.lam
        report["residual"] = budget.residual
        report["displacement_ok"] = disp < budget.eps
        report["lambda_ok"] = lam_emp < budget.lam
    if stages is not None:
        # uniform Cauchy check: h_k and h_{k+1} differ by at most eps_{k+1}
        st = State.from_points(G)
        gaps = []
        for s_ in stages:
            nxt = s_.bump._fwd(st)
            gaps.append(float(np.max(np.hypot(nxt.r - st.r, nxt.s - st.s))))
            st = nxt
        report["stage_gaps"] = gaps
        if budget is not None:
            report["cauchy_ok"] = bool(np.all(np.array(gaps) < budget.epsilons[:len(gaps)]))
    report["passed"] = bool(report["membership"] and boundary_exact and
                            report.get("displacement_ok", True) and report.get("lambda_ok", True))
    return report
