import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from squarelimits.errors import DomainError, InvalidInputError, NotInvertibleError, StepError
from squarelimits.interval_maps import f01_eval, f01_inverse
from squarelimits.map_algebra import (PLANE, AnnulusRotation, BaseF02, Compose, Conjugate, Identity, Inverse,
                                      MapExpr, Power, State, TangentChart, bilipschitz_estimate, eval_forward,
                                      eval_inverse, forward, from_document, inverse, orbit, orbit_arrays, power,
                                      to_document)
from squarelimits.steering import BumpMap

F02 = BaseF02()
inner = st.floats(-0.95, 0.95, allow_nan=False)


def bumps():
    return Compose([BumpMap([0.2, 0.1], [0.25, 0.12], 0.4), BumpMap([-0.5, 0.3], [-0.45, 0.28], 0.3)])


def test_f02_orbit_is_exact_ladder():
    O = orbit_arrays(F02, [[0.3, 0.0]], 0, 40)[:, 0]
    assert np.all(O[:, 0] == 0.3)
    assert all(O[n, 1] == 1.0 - 2.0 ** -n for n in range(41))


def test_f02_long_orbits_keep_the_height():
    R, S, T = F02._orbit(State.from_points([[0.0, 0.0]]), 0, 500)
    assert np.array_equal(T[:, 0], np.arange(501.0))
    assert S[-1, 0] == 1.0
    Rb, Sb, Tb = F02._orbit(State.from_points([[0.0, 0.0]]), 0, 500, -1)
    assert np.array_equal(Tb[:, 0], -np.arange(501.0))
    s = 0.0
    for n in range(1, 60):
        s = f01_inverse(s)
        assert Sb[n, 0] == pytest.approx(s, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(inner, inner, st.integers(0, 30))
def test_power_matches_repeated_steps(r, s, k):
    P = np.array([[r, s]])
    step = P
    for _ in range(k):
        step = forward(bumps() @ F02, step)
    assert np.allclose(power(bumps() @ F02, P, k), step, atol=1e-13)


@settings(max_examples=100, deadline=None)
@given(inner, inner)
def test_inverse_round_trip(r, s):
    m = Compose([bumps(), F02, Inverse(bumps())])
    P = np.array([[r, s]])
    assert np.allclose(inverse(m, forward(m, P)), P, atol=1e-13)
    assert np.allclose(forward(Inverse(m), P), inverse(m, P), atol=0)


def test_backward_orbits_step_the_inverse():
    m = bumps() @ F02
    P = np.array([[0.1, 0.2], [-0.3, -0.4]])
    back = orbit_arrays(Inverse(m), P, 0, 30)
    cur = P
    for k in range(1, 31):
        cur = inverse(m, cur)
        assert np.allclose(back[k], cur, atol=1e-14)
    tr = orbit(m, (0.1, 0.2), 0, 30, forward=False)
    assert np.allclose(tr.points, back[:, 0], atol=0)
    assert tr.last == eval_inverse(Power(m, 30), (0.1, 0.2))


def test_power_node_strides_the_orbit():
    m = bumps() @ F02
    P = np.array([[0.1, -0.6]])
    full = orbit_arrays(m, P, 0, 30)
    assert np.allclose(orbit_arrays(Power(m, 3), P, 0, 10), full[::3], atol=0)
    assert np.allclose(orbit_arrays(Power(m, -2), full[20], 0, 10), full[20::-2], atol=1e-13)


def test_conjugate_with_tangent_chart_matches_formula():
    F = Conjugate(TangentChart(), F02)
    assert F.domain == PLANE
    rng = np.random.default_rng(0)
    Q = rng.normal(0, 3, (50, 2))
    got = forward(F, Q)
    r = np.arctan(Q[:, 0]) * 2 / np.pi
    s = np.arctan(Q[:, 1]) * 2 / np.pi
    ref = np.column_stack([np.tan(r * np.pi / 2), np.tan(f01_eval(s) * np.pi / 2)])
    assert np.allclose(got, ref, rtol=1e-9, atol=1e-12)
    assert np.allclose(inverse(F, got), Q, rtol=1e-9, atol=1e-9)
    assert np.array_equal(forward(TangentChart(), [[0.0, 0.0]]), [[0.0, 0.0]])


def test_tangent_chart_rejects_the_boundary():
    with pytest.raises(DomainError):
        forward(TangentChart(), [[1.0, 0.0]])


def test_annulus_rotation():
    A = AnnulusRotation()
    P = np.array([[0.1, 0.25], [0.9, 0.5]])
    assert np.allclose(forward(A, P), [[0.35, 0.25], [0.4, 0.5]])
    assert np.allclose(power(A, P, 7), [[np.mod(0.1 + 7 * 0.25, 1), 0.25], [np.mod(0.9 + 3.5, 1), 0.5]])
    E = A.embed(np.array([0.25]), np.array([0.5]))
    assert np.allclose(E, [[0.0, 1.0, 0.5]], atol=1e-15)
    with pytest.raises(DomainError):
        forward(A, [[0.1, 1.5]])


def test_domain_and_range_errors():
    with pytest.raises(DomainError):
        forward(F02, [[1.2, 0.0]])
    with pytest.raises(DomainError):
        forward(F02, [[np.nan, 0.0]])
    with pytest.raises(InvalidInputError):
        orbit_arrays(F02, [[0.0, 0.0]], 5, 2)
    with pytest.raises(InvalidInputError):
        Compose([])
    with pytest.raises(InvalidInputError):
        Compose([F02, TangentChart()])


class _OneWay(MapExpr):
    kind = "one_way"

    def _fwd(self, st):
        return st


class _Fragile(MapExpr):
    kind = "fragile"

    def _fwd(self, st):
        if np.any(st.s > 0.8):
            raise ValueError("too high")
        return F02._fwd(st)


def test_non_invertible_and_step_errors():
    with pytest.raises(NotInvertibleError):
        inverse(_OneWay(), [[0.0, 0.0]])
    with pytest.raises(StepError) as exc:
        power(_Fragile(), [[0.0, 0.0]], 10)
    assert exc.value.step == 4


def test_serialization_round_trip():
    m = Conjugate(bumps(), Compose([Power(F02, 2), Inverse(bumps()), Identity()]))
    doc = json.loads(json.dumps(to_document(m)))
    back = from_document(doc)
    P = np.random.default_rng(1).uniform(-0.9, 0.9, (20, 2))
    assert np.array_equal(forward(back, P), forward(m, P))
    assert to_document(back) == to_document(m)
    with pytest.raises(InvalidInputError):
        from_document({"format": "other"})
    with pytest.raises(InvalidInputError):
        from_document({"format": "squarelimits.mapexpr", "version": 1, "root": {"kind": "nope"}})


def test_bilipschitz_estimate_bounds():
    assert bilipschitz_estimate(Identity(), 2000, 0) == 1.0
    lam = bilipschitz_estimate(F02, 5000, 0)
    assert 1.0 < lam <= 2.0 + 1e-9
    assert Compose([F02, F02]).lipschitz_bound == 4.0


def test_eval_point_helpers():
    p = eval_forward(F02, (0.5, 0.0))
    assert (p.r, p.s) == (0.5, 0.5)
    assert tuple(eval_inverse(F02, p)) == (0.5, 0.0)
