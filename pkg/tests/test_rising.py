import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from squarelimits import analysis as an
from squarelimits.errors import InvalidSpecError, MarginError
from squarelimits.geometry import Segment1D, square_boundary_samples
from squarelimits.interval_maps import f01_eval, from_height, height
from squarelimits.map_algebra import BaseF02, State, forward, from_document, inverse, orbit_arrays, to_document
from squarelimits.rising import (CombBands, ExplicitBands, RisingSpec, build_rising, fiber_map,
                                 layout_from_dict, phase_and_clock, point_targets_spec, sweep_fraction)


def test_sweep_fraction_sequence():
    # level j lists the multiples of 2^-j, odd levels descending
    j, out = 1, [0.0, 1.0]
    while len(out) < 300:
        vals = [(i + 1) / 2 ** j for i in range(2 ** j)]
        out += [1.0 - v for v in vals] if j % 2 else vals
        j += 1
    assert np.array_equal(sweep_fraction(np.arange(300)), np.array(out[:300]))
    with pytest.raises(ValueError):
        sweep_fraction(-1)


def test_sweep_visits_every_dyadic_at_each_level():
    even = np.arange(2 ** 8, 2 ** 9)
    assert set(sweep_fraction(even)) == {i / 2 ** 8 for i in range(1, 2 ** 8 + 1)}
    odd = np.arange(2 ** 9, 2 ** 10)
    assert set(sweep_fraction(odd)) == {i / 2 ** 9 for i in range(2 ** 9)}


def spec3(**kw):
    return RisingSpec(CombBands(3, 1000), (Segment1D(-0.5, -0.2), Segment1D(0.1, 0.4), Segment1D(0.6, 0.6)),
                      (Segment1D(0.3, 0.6), Segment1D(-0.7, -0.6), Segment1D(0.0, 0.0)), **kw)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1))
def test_rising_contract(r, s):
    f = build_rising(spec3())
    img = forward(f, [[r, s]])[0]
    assert img[1] == f01_eval(s)
    if abs(r) == 1.0 or abs(s) == 1.0:
        assert np.array_equal(img, forward(BaseF02(), [[r, s]])[0])


def test_boundary_equals_f02():
    f = build_rising(spec3())
    B = square_boundary_samples(1000)
    assert np.array_equal(forward(f, B), forward(BaseF02(), B))


@settings(max_examples=100, deadline=None)
@given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99))
def test_inverse_round_trip(r, s):
    f = build_rising(spec3())
    P = np.array([[r, s]])
    assert np.allclose(inverse(f, forward(f, P)), P, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-30, 30), st.floats(-1, 1))
def test_fiber_maps_are_increasing_homeomorphisms(tau, r):
    f = build_rising(spec3())
    s = float(from_height(np.array([tau]))[0])
    if abs(s) == 1.0:
        return
    g = fiber_map(f, s)
    R = np.linspace(-1, 1, 501)
    v = g(R)
    assert v[0] == -1.0 and v[-1] == 1.0 and np.all(np.diff(v) > 0)
    h = float(height(np.array([s]))[0])
    assert g(r) == pytest.approx(float(f.horizontal(np.array([r]), np.array([h]))[0]), abs=1e-12)


def test_phase_is_invariant_and_clock_ticks():
    f = build_rising(spec3())
    R, S, T = f._orbit(State.from_points([[0.1, 0.3]]), 0, 50)
    phase, clock = phase_and_clock(T[:, 0])
    assert np.allclose(phase, phase[0], atol=1e-12)
    assert np.array_equal(np.diff(clock), np.ones(50))


def test_continuity_modulus_bounds_fiber_variation():
    f = build_rising(spec3())
    L = f.continuity_modulus()
    rng = np.random.default_rng(0)
    tau = rng.uniform(-5, 5, 2000)
    dt = rng.uniform(-1e-6, 1e-6, 2000)
    r = rng.uniform(-1, 1, 2000)
    d = np.abs(f.horizontal(r, tau + dt) - f.horizontal(r, tau))
    assert np.all(d <= L * np.abs(dt) + 1e-12)


def test_edge_limits_match_targets():
    sp = spec3()
    f = build_rising(sp)
    lay = sp.layout
    for n in range(3):
        center = float(lay.tooth_centers(n)[5])
        s = float(from_height(np.array([center]))[0])
        for d, tgt, edge in ((an.OMEGA, sp.omega[n], 1.0), (an.ALPHA, sp.alpha[n], -1.0)):
            e = an.estimate_limit_set(f, (0.2, s), d, 500, 2000)
            ref = np.column_stack([tgt.sample(400), np.full(400 if not tgt.is_point else 1, edge)])
            assert e.hausdorff_to(ref) < 0.05


def test_band_membership():
    lay = CombBands(3, 10, 0.5)
    centers = lay.tooth_centers(2)
    assert np.all(lay.family_at(centers) == 2)
    assert np.all(lay.family_at(centers + lay.pitch / 2) == -1)
    ex = ExplicitBands.from_ordinate_bands([[(0.1, 0.15)], [(0.3, 0.35)]])
    assert ex.family_at(np.array([float(height(0.12))]))[0] == 0
    assert ex.family_at(np.array([float(height(0.2))]))[0] == -1
    with pytest.raises(InvalidSpecError):
        ExplicitBands.from_ordinate_bands([[(0.1, 0.6)]])
    with pytest.raises(InvalidSpecError):
        ExplicitBands.from_ordinate_bands([[(0.1, 0.2)], [(0.15, 0.3)]]).validate(0.01)
    with pytest.raises(InvalidSpecError):
        CombBands(0, 10)


def test_spec_validation():
    with pytest.raises(MarginError):
        build_rising(point_targets_spec([0.99], [0.0], CombBands(1, 10)))
    with pytest.raises(InvalidSpecError):
        build_rising(spec3(c=1.5))
    with pytest.raises(InvalidSpecError):
        build_rising(RisingSpec(CombBands(2, 10), (Segment1D(0, 0),), (Segment1D(0, 0),)))


def test_serialization():
    f = build_rising(spec3())
    back = from_document(json.loads(json.dumps(to_document(f))))
    P = np.random.default_rng(2).uniform(-1, 1, (100, 2))
    assert np.array_equal(forward(back, P), forward(f, P))
    assert layout_from_dict(CombBands(2, 7, 0.3).to_dict()) == CombBands(2, 7, 0.3)
    O1 = orbit_arrays(back, P[:5], 0, 100)
    assert np.array_equal(O1, orbit_arrays(f, P[:5], 0, 100))
