"""Normally rising homeomorphisms with prescribed edge limits on fiber families.

The map is (r, s) -> (g(r), f01(s)), where g depends on the fiber through its
height tau (f01 adds one to the height). Each height has a phase in (0, 1] and
a clock ceil(tau) - 1; the phase is invariant along orbits, the clock ticks.
Phases are partitioned into bands (one family each) and gaps. On a band of
family n the fiber map contracts toward a pull point: on the upper half the
pull is a sweep of the n-th top target indexed by the clock, on the lower half
the fiber map is the inverse of a contraction toward a sweep of the n-th
bottom target, so backward orbits contract there. In gaps the pull is linear
in height between the neighbouring bands, which keeps everything continuous.
Strength fades to zero at height 0 and at both edges, so the map agrees with
f02 on the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidSpecError, MarginError
from .geometry import Segment1D
from .interval_maps import PLHomeo1D, height
from .map_algebra import MapExpr, State, lifted_vertical_step, register_kind

DEFAULT_C = 0.5
DEFAULT_GAP_MIN = 0.01
DEFAULT_MARGIN = 0.05
DEFAULT_STRENGTH = 0.25
DEFAULT_HORIZON = 64.0


# -- sweeps ----------------------------------------------------------------------

def sweep_fraction(k):
    """Dyadic back-and-forth sequence in [0, 1]: 0, 1 | 1/2, 0 | 1/4, .., 1 | 7/8, .., 0 | ...

    Level j >= 1 occupies k in [2^j, 2^(j+1)) and visits the 2^j multiples of
    2^-j, ascending for even j and descending for odd j.
    """
    k = np.asarray(k)
    if np.any(k < 0):
        raise ValueError("sweep index must be non-negative")
    kf = np.maximum(k, 1).astype(float)
    _, e = np.frexp(kf)
    j = e - 1
    step = np.ldexp(1.0, -j)
    i = kf - np.ldexp(1.0, j)
    u = np.where(j % 2 == 1, 1.0 - (i + 1) * step, (i + 1) * step)
    u = np.where(k == 0, 0.0, np.where(k == 1, 1.0, u))
    return float(u) if u.ndim == 0 else u


def sweep_program(target: Segment1D, step_index: int) -> float:
    if target.is_point:
        return target.lo
    return target.lo + (target.hi - target.lo) * sweep_fraction(int(step_index))


# -- band layouts ----------------------------------------------------------------

class BandLayout:
    """Partition of the phase circle (0, 1] into family bands and gaps."""

    n_families: int
    teeth_per_clock: int

    def locate(self, phase):
        """(inside, prev_tooth, next_tooth, prev_end, next_start) per phase.

        Tooth indices run 0..teeth_per_clock-1 within a clock; -1 means the last
        tooth of the previous clock and teeth_per_clock the first of the next.
        Inside a tooth prev_tooth == next_tooth.
        """
        raise NotImplementedError

    def family_of_tooth(self, g):
        raise NotImplementedError

    def family_at(self, phase):
        """Family index at each phase, -1 in gaps."""
        inside, g, _, _, _ = self.locate(phase)
        return np.where(inside, self.family_of_tooth(np.where(inside, g, 0)), -1)

    def tooth_centers(self, family: int) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ExplicitBands(BandLayout):
    """Finite unions of closed phase intervals, one union per family."""

    intervals: tuple  # ((lo, hi, family), ...) sorted, phases in (0, 1]
    n_families: int

    @classmethod
    def from_ordinate_bands(cls, bands: Sequence[Sequence[Sequence[float]]]):
        """bands[n] = list of closed s-intervals inside (0, 1/2]."""
        items = []
        for n, fam in enumerate(bands):
            for lo, hi in fam:
                if not (0.0 < lo <= hi <= 0.5):
                    raise InvalidSpecError(f"band [{lo}, {hi}] of family {n} not inside (0, 1/2]")
                items.append((float(height(lo)), float(height(hi)), n))
        items.sort()
        return cls(tuple(items), len(bands))

    @property
    def teeth_per_clock(self):
        return len(self.intervals)

    def _arrays(self):
        a = np.array([t[0] for t in self.intervals])
        b = np.array([t[1] for t in self.intervals])
        return a, b

    def locate(self, phase):
        phase = np.asarray(phase, dtype=float)
        a, b = self._arrays()
        nt = len(a)
        i = np.searchsorted(a, phase, side="right") - 1  # last tooth starting at or before phase
        ic = np.clip(i, 0, nt - 1)
        inside = (i >= 0) & (phase <= b[ic])
        prev = np.where(inside, i, i)
        nxt = np.where(inside, i, i + 1)
        prev_end = np.where(prev >= 0, b[np.clip(prev, 0, nt - 1)], b[-1] - 1.0)
        next_start = np.where(nxt < nt, a[np.clip(nxt, 0, nt - 1)], a[0] + 1.0)
        return inside, prev, nxt, prev_end, next_start

    def family_of_tooth(self, g):
        fam = np.array([t[2] for t in self.intervals])
        return fam[np.mod(g, len(fam))]

    def tooth_centers(self, family):
        return np.array([(lo + hi) / 2 for lo, hi, n in self.intervals if n == family])

    def validate(self, gap_min: float):
        for (a0, b0, n0), (a1, b1, n1) in zip(self.intervals, self.intervals[1:]):
            if a1 <= b0:
                raise InvalidSpecError(f"bands of families {n0} and {n1} overlap")
        # gaps are measured on the ordinate scale the bands were given in
        s_int = [(1 - 2.0 ** -a, 1 - 2.0 ** -b) for a, b, _ in self.intervals]
        for (lo0, hi0), (lo1, hi1) in zip(s_int, s_int[1:]):
            if lo1 - hi0 < gap_min - 1e-12:
                raise InvalidSpecError(f"band gap {lo1 - hi0:.3g} below gap_min {gap_min}")
        fams = {n for _, _, n in self.intervals}
        if fams != set(range(self.n_families)):
            raise InvalidSpecError("every family needs at least one band")

    def to_dict(self):
        return {"layout": "explicit", "phase_intervals": [list(t) for t in self.intervals],
                "n_families": self.n_families}


@dataclass(frozen=True)
class CombBands(BandLayout):
    """Periodic comb: each of ``cells`` equal cells holds one tooth per family.

    Tooth g (0-based within a clock) covers the middle ``fill`` fraction of
    [g, g + 1] * pitch with pitch = 1 / (cells * n_families), and belongs to
    family g mod n_families. Fine combs make every family dense at small scale.
    """

    n_families: int
    cells: int
    fill: float = 0.5

    def __post_init__(self):
        if self.n_families < 1 or self.cells < 1 or not 0.0 < self.fill < 1.0:
            raise InvalidSpecError("comb needs n_families, cells >= 1 and fill in (0, 1)")

    @property
    def teeth_per_clock(self):
        return self.cells * self.n_families

    @property
    def pitch(self):
        return 1.0 / self.teeth_per_clock

    @property
    def gap(self):
        return (1.0 - self.fill) * self.pitch

    def locate(self, phase):
        phase = np.asarray(phase, dtype=float)
        nt, pt = self.teeth_per_clock, self.pitch
        x = phase / pt
        g = np.minimum(np.floor(x), nt - 1)
        u = x - g
        h = (1.0 - self.fill) / 2.0
        inside = (u >= h) & (u <= 1.0 - h)
        prev = np.where(inside | (u > 1.0 - h), g, g - 1)
        nxt = np.where(inside | (u < h), g, g + 1)
        prev_end = (prev + 1.0 - h) * pt
        next_start = (nxt + h) * pt
        return inside, prev.astype(np.int64), nxt.astype(np.int64), prev_end, next_start

    def family_of_tooth(self, g):
        return np.mod(g, self.n_families)

    def tooth_center(self, g):
        return (np.asarray(g) + 0.5) * self.pitch

    def tooth_centers(self, family):
        return self.tooth_center(np.arange(family, self.teeth_per_clock, self.n_families))

    def validate(self, gap_min: float):
        pass  # the comb gap replaces gap_min

    def to_dict(self):
        return {"layout": "comb", "n_families": self.n_families, "cells": self.cells,
                "fill": self.fill}


def layout_from_dict(d: dict) -> BandLayout:
    if d["layout"] == "comb":
        return CombBands(int(d["n_families"]), int(d["cells"]), float(d.get("fill", 0.5)))
    if d["layout"] == "explicit":
        if "phase_intervals" in d:
            return ExplicitBands(tuple((float(a), float(b), int(n)) for a, b, n in d["phase_intervals"]),
                                 int(d["n_families"]))
        return ExplicitBands.from_ordinate_bands(d["bands"])
    raise InvalidSpecError(f"unknown band layout {d['layout']!r}")


# -- spec and map ----------------------------------------------------------------

@dataclass(frozen=True)
class RisingSpec:
    layout: BandLayout
    omega: tuple  # Segment1D per family, abscissae on the top edge
    alpha: tuple  # Segment1D per family, abscissae on the bottom edge
    c: float = DEFAULT_C
    gap_min: float = DEFAULT_GAP_MIN
    margin: float = DEFAULT_MARGIN
    strength: float = DEFAULT_STRENGTH
    horizon: float = DEFAULT_HORIZON

    @property
    def m(self) -> int:
        return self.layout.n_families

    def validate(self) -> None:
        if not 0.0 < self.c < 1.0:
            raise InvalidSpecError(f"contraction factor {self.c} outside (0, 1)")
        if not (self.strength > 0 and self.horizon > 0):
            raise InvalidSpecError("strength and horizon must be positive")
        if len(self.omega) != self.m or len(self.alpha) != self.m:
            raise InvalidSpecError("one top and one bottom target per family")
        for n, seg in enumerate(list(self.omega) + list(self.alpha)):
            if seg.lo < -1 + self.margin or seg.hi > 1 - self.margin:
                raise MarginError(f"target [{seg.lo}, {seg.hi}] closer than {self.margin} to an end")
        self.layout.validate(self.gap_min)

    def to_dict(self) -> dict:
        return {
            "bands": self.layout.to_dict(),
            "omega": [[s.lo, s.hi] for s in self.omega],
            "alpha": [[s.lo, s.hi] for s in self.alpha],
            "c": self.c, "gap_min": self.gap_min, "margin": self.margin,
            "strength": self.strength, "horizon": self.horizon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RisingSpec":
        seg = lambda x: Segment1D(float(x[0]), float(x[-1])) if isinstance(x, (list, tuple)) \
            else Segment1D(float(x), float(x))
        return cls(layout_from_dict(d["bands"]),
                   tuple(seg(x) for x in d["omega"]), tuple(seg(x) for x in d["alpha"]),
                   c=float(d.get("c", DEFAULT_C)), gap_min=float(d.get("gap_min", DEFAULT_GAP_MIN)),
                   margin=float(d.get("margin", DEFAULT_MARGIN)),
                   strength=float(d.get("strength", DEFAULT_STRENGTH)),
                   horizon=float(d.get("horizon", DEFAULT_HORIZON)))


def phase_and_clock(tau):
    """phase in (0, 1] and integer clock with tau = clock + phase."""
    tau = np.asarray(tau, dtype=float)
    k = np.ceil(tau) - 1.0
    return tau - k, k


def _contract(r, p, rho, c):
    # PL map fixing +-1 that shrinks [p - rho, p + rho] by c around p
    lo, hi = p - rho, p + rho
    with np.errstate(invalid="ignore", divide="ignore"):
        left = -1.0 + (r + 1.0) * ((p - c * rho + 1.0) / (lo + 1.0))
        mid = p + c * (r - p)
        right = 1.0 - (1.0 - r) * ((1.0 - p - c * rho) / (1.0 - hi))
    out = np.where(r < lo, left, np.where(r <= hi, mid, right))
    return np.where(rho > 0, out, r)


def _expand(r, p, rho, c):
    # inverse of _contract
    lo, hi = p - c * rho, p + c * rho
    with np.errstate(invalid="ignore", divide="ignore"):
        left = -1.0 + (r + 1.0) * ((p - rho + 1.0) / (lo + 1.0))
        mid = p + (r - p) / c
        right = 1.0 - (1.0 - r) * ((1.0 - p - rho) / (1.0 - hi))
    out = np.where(r < lo, left, np.where(r <= hi, mid, right))
    return np.where(rho > 0, out, r)


@dataclass(frozen=True, eq=False)
class FiberMap(PLHomeo1D):
    """A single fiber map; evaluation shares the arithmetic of the planar map."""

    pull: float = 0.0
    rho: float = 0.0
    c: float = 0.5
    expanding: bool = False

    def __call__(self, s):
        arr = np.asarray(s, dtype=float)
        fn = _expand if self.expanding else _contract
        out = fn(arr, self.pull, self.rho, self.c)
        return float(out) if np.ndim(s) == 0 else out


class FiberedRisingMap(MapExpr):
    kind = "fibered_rising"
    lipschitz_bound = None

    def __init__(self, spec: RisingSpec):
        self.spec = spec
        self._olo = np.array([s.lo for s in spec.omega])
        self._ohi = np.array([s.hi for s in spec.omega])
        self._alo = np.array([s.lo for s in spec.alpha])
        self._ahi = np.array([s.hi for s in spec.alpha])

    # strength of the fiber map at height tau
    def strength(self, tau):
        a = np.abs(np.asarray(tau, dtype=float))
        sp = self.spec
        with np.errstate(invalid="ignore"):
            out = sp.strength * np.minimum(1.0, a) * sp.horizon / (sp.horizon + a)
        return np.where(np.isfinite(a), out, 0.0)

    def tooth_pull(self, g, clock):
        """Pull value of tooth g (clock-relative, may be -1 or teeth_per_clock)."""
        nt = self.spec.layout.teeth_per_clock
        g = np.asarray(g, dtype=np.int64)
        k = np.asarray(clock, dtype=float) + np.floor_divide(g, nt)
        fam = self.spec.layout.family_of_tooth(np.mod(g, nt))
        up = k >= 0
        kk = np.where(up, k, -k - 1.0)
        u = sweep_fraction(kk.astype(np.int64))
        lo = np.where(up, self._olo[fam], self._alo[fam])
        hi = np.where(up, self._ohi[fam], self._ahi[fam])
        return lo + (hi - lo) * u

    def pull(self, tau):
        tau = np.asarray(tau, dtype=float)
        fin = np.isfinite(tau)
        t = np.where(fin, tau, 0.5)
        phase, clock = phase_and_clock(t)
        inside, prev, nxt, prev_end, next_start = self.spec.layout.locate(phase)
        p_prev = self.tooth_pull(prev, clock)
        p_next = self.tooth_pull(nxt, clock)
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.clip((phase - prev_end) / (next_start - prev_end), 0.0, 1.0)
        p = np.where(inside, p_prev, p_prev + w * (p_next - p_prev))
        return np.where(fin, p, 0.0)

    def fiber_params(self, tau):
        p = self.pull(tau)
        sig = self.strength(tau)
        c = self.spec.c
        rho = np.minimum(sig / (1.0 - c), (1.0 - np.abs(p)) / 2.0)
        return p, np.where(sig > 0, rho, 0.0)

    def horizontal(self, r, tau):
        p, rho = self.fiber_params(tau)
        c = self.spec.c
        return np.where(np.asarray(tau) > 0, _contract(r, p, rho, c), _expand(r, p, rho, c))

    def horizontal_inverse(self, r, tau):
        p, rho = self.fiber_params(tau)
        c = self.spec.c
        return np.where(np.asarray(tau) > 0, _expand(r, p, rho, c), _contract(r, p, rho, c))

    def _fwd(self, st):
        r = self.horizontal(st.r, st.tau)
        s, tau = lifted_vertical_step(st, 1)
        return State(r, s, tau)

    def _inv(self, st):
        s, tau = lifted_vertical_step(st, -1)
        return State(self.horizontal_inverse(st.r, tau), s, tau)

    def continuity_modulus(self) -> float:
        """Bound on |g_tau(r) - g_tau'(r)| / |tau - tau'| (height coordinate).

        The pull moves at most (target spread) / (shortest gap) per unit height
        and each fiber map moves by at most the change in pull plus the change
        in zone radius.
        """
        sp = self.spec
        lay = sp.layout
        if isinstance(lay, CombBands):
            gap = lay.gap
        else:
            a, b = lay._arrays()
            gaps = np.append(a[1:] - b[:-1], a[0] + 1.0 - b[-1])
            gap = float(np.min(gaps))
        spread = max(np.max(self._ohi), np.max(self._ahi)) - min(np.min(self._olo), np.min(self._alo))
        dsig = sp.strength  # |d sigma / d tau| <= strength
        return float(spread / gap + 2.0 * dsig / (1.0 - sp.c))

    def to_dict(self):
        return {"kind": self.kind, "spec": self.spec.to_dict()}


register_kind("fibered_rising", lambda d, resolver: FiberedRisingMap(RisingSpec.from_dict(d["spec"])))


def build_rising(spec: RisingSpec) -> FiberedRisingMap:
    spec.validate()
    return FiberedRisingMap(spec)


def fiber_map(f: FiberedRisingMap, s: float) -> PLHomeo1D:
    """The horizontal homeomorphism g_s of the fiber at ordinate s."""
    tau = float(height(s))
    p, rho = (float(v) for v in f.fiber_params(tau))
    c = f.spec.c
    if rho == 0.0:
        return PLHomeo1D.identity()
    xs = np.array([-1.0, p - rho, p + rho, 1.0])
    ys = np.array([-1.0, p - c * rho, p + c * rho, 1.0])
    expanding = tau < 0
    if expanding:
        xs, ys = ys, xs
    return FiberMap(xs, ys, pull=p, rho=rho, c=c, expanding=expanding)


def point_targets_spec(omega: Sequence[float], alpha: Sequence[float], layout: BandLayout,
                       **kw) -> RisingSpec:
    return RisingSpec(layout, tuple(Segment1D(x, x) for x in omega),
                      tuple(Segment1D(x, x) for x in alpha), **kw)
