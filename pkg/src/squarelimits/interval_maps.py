"""Piecewise-linear homeomorphisms of J = [-1, 1] and the vertical drift f01.

f01 fixes -1 and 1 and pushes every interior point upward:

    f01(s) = (s + 1) / 2   for 0 <= s <= 1
           = s + 1/2       for -1/2 <= s <= 0
           = 2 s + 1       for -1 <= s <= -1/2

On [0, 1) the coordinate t = -log2(1 - s) turns f01 into t -> t + 1. The
module also exposes a global "height" that extends this to all of (-1, 1):
f01 acts on height as a unit translation everywhere, which lets orbits keep
an exact vertical clock long after s itself has rounded to 1.0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DomainError, InvalidInputError

# beyond this many steps every ladder point is within 1e-12 of an edge
DEFAULT_K_RANGE = (-40, 40)


def _check_domain(s):
    arr = np.asarray(s, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(np.abs(arr) > 1.0):
        raise DomainError(f"argument outside J = [-1, 1]: {s}")
    return arr


def f01_eval(s):
    """Exact branch evaluation of f01 (scalar or array)."""
    arr = _check_domain(s)
    out = np.where(arr >= 0.0, (arr + 1.0) / 2.0,
                   np.where(arr >= -0.5, arr + 0.5, 2.0 * arr + 1.0))
    return float(out) if np.ndim(s) == 0 else out


def f01_inverse(s):
    arr = _check_domain(s)
    out = np.where(arr >= 0.5, 2.0 * arr - 1.0,
                   np.where(arr >= 0.0, arr - 0.5, (arr - 1.0) / 2.0))
    return float(out) if np.ndim(s) == 0 else out


@dataclass(frozen=True, eq=False)
class PLHomeo1D:
    """Increasing PL homeomorphism of J fixing both endpoints."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.breakpoints, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
            raise InvalidInputError("breakpoints and values must be equal-length 1-D sequences")
        if x[0] != -1.0 or x[-1] != 1.0 or y[0] != -1.0 or y[-1] != 1.0:
            raise InvalidInputError("a homeomorphism of J must fix -1 and 1")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise InvalidInputError("breakpoints and values must be strictly increasing")
        object.__setattr__(self, "breakpoints", x)
        object.__setattr__(self, "values", y)

    @classmethod
    def identity(cls) -> "PLHomeo1D":
        return cls(np.array([-1.0, 1.0]), np.array([-1.0, 1.0]))

    def __call__(self, s):
        arr = _check_domain(s)
        if len(self.breakpoints) == 2:  # the only such map is the identity
            return float(arr) if np.ndim(s) == 0 else arr.copy()
        out = _pl_eval(self.breakpoints, self.values, arr)
        return float(out) if np.ndim(s) == 0 else out

    def inverse(self) -> "PLHomeo1D":
        return PLHomeo1D(self.values, self.breakpoints)

    def compose(self, other: "PLHomeo1D") -> "PLHomeo1D":
        """self o other."""
        xs = np.union1d(other.breakpoints, other.inverse()(self.breakpoints))
        return PLHomeo1D(xs, self(other(xs)))


def _pl_eval(x, y, s):
    # exact at breakpoints: np.interp returns the stored value there
    return np.interp(s, x, y)


F01 = PLHomeo1D(np.array([-1.0, -0.5, 0.0, 1.0]), np.array([-1.0, 0.0, 0.5, 1.0]))


def pl_iterate(h, s: float, k: int) -> float:
    """k-fold composition of h (inverse for negative k); f01 uses exact branches."""
    _check_domain(s)
    if h is F01:
        fwd, inv = f01_eval, f01_inverse
    else:
        fwd, inv = h, h.inverse()
    step = fwd if k >= 0 else inv
    x = float(s)
    for _ in range(abs(int(k))):
        x = step(x)
    return x


def ladder_closure(seed: Iterable[float], k_range=DEFAULT_K_RANGE) -> np.ndarray:
    """Sorted, deduplicated {f01^k(x) : x in seed, k in k_range}."""
    seed = [float(x) for x in seed]
    for x in seed:
        if not 0.0 < x <= 0.5:
            raise InvalidInputError(f"seed value {x} outside (0, 1/2]")
    k0, k1 = k_range
    pts = [pl_iterate(F01, x, k) for x in seed for k in range(k0, k1 + 1)]
    pts = np.unique(np.asarray(pts))
    return pts[(pts > -1.0) & (pts < 1.0)]


@dataclass(frozen=True)
class LadderCoordinate:
    t: float
    upper: bool


def to_ladder_coordinate(s: float) -> LadderCoordinate:
    if not 0.0 <= s < 1.0:
        raise DomainError(f"ladder coordinate needs s in [0, 1), got {s}")
    return LadderCoordinate(t=-math.log2(1.0 - s), upper=True)


def from_ladder_coordinate(t: float) -> float:
    return 1.0 - 2.0 ** (-t)


# -- global height: f01 acts as height -> height + 1 on (-1, 1) --------------

def height(s):
    """Height of s in (-1, 1); +/-inf on the edges.

    Upper half: -log2(1 - s). Lower half: with u = -log2(1 + s) (which grows by
    one under f01^-1), height = -floor(u) - log2(3 - 2**(1 - frac(u))).
    """
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    up = s >= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        out[up] = -np.log2(1.0 - s[up])
        u = -np.log2(1.0 + s[~up])
        m = np.floor(u)
        out[~up] = -m - np.log2(3.0 - 2.0 ** (1.0 - (u - m)))
    out[~up & (s <= -1.0)] = -np.inf
    return out


def height_from_gap(gap, upper):
    """Height of the ordinate 1 - gap (upper) or gap - 1 (lower), exact for tiny gaps."""
    gap = np.asarray(gap, dtype=float)
    upper = np.broadcast_to(np.asarray(upper, dtype=bool), gap.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = -np.log2(gap)
        m = np.floor(u)
        lower = -m - np.log2(3.0 - 2.0 ** (1.0 - (u - m)))
        out = np.where(upper, u, lower)
    # the lower formula covers gaps up to 1; the ordinate 0 sits at height 0 on both sides
    out = np.where(~upper & (gap >= 1.0), 0.0, out)
    return np.where(gap <= 0.0, np.where(upper, np.inf, -np.inf), out)


def edge_gap(tau):
    """Distance 1 - |s| from the ordinate at height tau to its nearest edge."""
    tau = np.asarray(tau, dtype=float)
    up = tau >= 0.0
    t = np.where(up, 0.0, -tau)
    with np.errstate(invalid="ignore", over="ignore"):
        m = np.floor(t)
        s0 = (1.0 - np.exp2(t - m)) / 2.0
        low = (1.0 + s0) * np.exp2(-m)
        out = np.where(up, np.exp2(-np.where(up, tau, 0.0)), low)
    return np.where(np.isinf(tau), 0.0, out)


def from_height(tau):
    tau = np.asarray(tau, dtype=float)
    out = np.empty_like(tau)
    up = tau >= 0.0
    out[up] = 1.0 - np.exp2(-tau[up])
    t = -tau[~up]
    with np.errstate(invalid="ignore"):
        m = np.floor(t)
        s0 = (1.0 - np.exp2(t - m)) / 2.0  # height m - t in (-1, 0] sits at s0 in [-1/2, 0]
        out[~up] = (1.0 + s0) * np.exp2(-m) - 1.0
    out[np.isneginf(tau)] = -1.0
    out[np.isposinf(tau)] = 1.0
    return out
