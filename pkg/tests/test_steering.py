import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from squarelimits.errors import EnumerationDepthError, InvalidInputError, InvalidSpecError, NearSingularError
from squarelimits.geometry import square_boundary_samples
from squarelimits.map_algebra import Compose, Identity, bilipschitz_estimate, forward, inverse
from squarelimits.rising import CombBands
from squarelimits.steering import (BumpMap, ExplicitEnumeration, FiberFamilies, HaltonEnumeration,
                                   MappedEnumeration, SteeringBudget, build_steering, make_bump, verify_steering)

inner = st.floats(-0.9, 0.9, allow_nan=False)


@pytest.mark.parametrize("schedule", ["geometric", "polynomial"])
def test_budget_sums_stay_inside_global_budget(schedule):
    b = SteeringBudget(2.0, 0.2, 40, schedule)
    b.check()
    assert b.mu[-1] < 2.0 and b.delta[-1] < 0.2 and b.residual > 0
    assert np.all(np.diff(b.lambdas) < 0) and np.all(np.diff(b.epsilons) < 0)
    assert np.prod(b.lambdas) == pytest.approx(b.mu[-1])


def test_budget_rejects_bad_parameters():
    with pytest.raises(InvalidSpecError):
        SteeringBudget(1.0, 0.2)
    with pytest.raises(InvalidSpecError):
        SteeringBudget(2.0, 0.0)
    with pytest.raises(InvalidSpecError):
        SteeringBudget(2.0, 0.2, 8, "linear")
    # geometric stage distortions round to exactly 1 after about fifty stages
    with pytest.raises(InvalidSpecError):
        SteeringBudget(2.0, 0.2, 64, "geometric").check()


def test_halton_enumeration():
    E = HaltonEnumeration(3, 5)
    a = E.family(1, 10, 4)
    assert np.array_equal(a, HaltonEnumeration(3, 5).family(1, 10, 4))
    assert np.array_equal(a[0], E.family(1, 1, 4)[0])
    E.family(1, 50_000)
    assert np.array_equal(a, E.family(1, 10, 4))
    # each family fills the whole square, not a strip
    P = E.family(0, 4000)
    assert np.histogram2d(P[:, 0], P[:, 1], bins=4, range=[[-1, 1], [-1, 1]])[0].min() > 200
    assert np.all(np.abs(a) < 1)
    fams = [set(map(tuple, E.family(n, 200))) for n in range(3)]
    assert not (fams[0] & fams[1]) and not (fams[1] & fams[2])
    chi = E.chi(9)
    assert [c[1] for c in chi] == [0, 1, 2] * 3 and [c[2] for c in chi] == [0, 0, 0, 1, 1, 1, 2, 2, 2]
    assert E.label(4) == 1
    with pytest.raises(InvalidInputError):
        HaltonEnumeration(0, 1)


def test_explicit_enumeration_skips_exhausted_families():
    E = ExplicitEnumeration([[[0.1, 0.1]], [[0.2, 0.2], [0.3, 0.3], [0.4, 0.4]]])
    assert [(c[1], c[2]) for c in E.chi(10)] == [(0, 0), (1, 0), (1, 1), (1, 2)]
    assert E.contains(1, (0.3, 0.3)) and not E.contains(0, (0.3, 0.3))
    p, i = E.find(1, np.array([0.31, 0.3]), 0.02)
    assert i == 1 and np.array_equal(p, [0.3, 0.3])
    with pytest.raises(EnumerationDepthError):
        E.find(0, np.array([0.9, 0.9]), 0.01)


def test_mapped_enumeration_skips_singular_points():
    def fn(P):
        if P[0, 0] > 0:
            raise NearSingularError("right half")
        return P * 0.5
    M = MappedEnumeration(HaltonEnumeration(2, 0), fn)
    pts = M.family(0, 20)
    assert len(pts) == 20 and np.all(pts[:, 0] <= 0)
    src = HaltonEnumeration(2, 0).family(0, M.source_index(0, 19) + 1)
    assert np.array_equal(src[M.source_index(0, 19)] * 0.5, pts[19])
    assert M.skipped


@settings(max_examples=100, deadline=None)
@given(inner, inner, st.floats(0, 0.95), st.floats(0, 2 * np.pi), inner, inner)
def test_bump_properties(zr, zs, k, ang, pr, ps):
    radius = min(0.1, 1 - max(abs(zr), abs(zs)))
    z = np.array([zr, zs])
    y = z + k * radius * np.array([np.cos(ang), np.sin(ang)])
    b = BumpMap(z, y, radius)
    assert np.array_equal(forward(b, z[None])[0], y)
    assert np.array_equal(inverse(b, y[None])[0], z)
    P = np.array([[pr, ps]])
    assert np.allclose(inverse(b, forward(b, P)), P, atol=1e-12)
    if np.hypot(pr - zr, ps - zs) >= radius:
        assert np.array_equal(forward(b, P), P)


def test_bump_lipschitz_bound():
    b = BumpMap([0.0, 0.0], [0.05, 0.0], 0.1)
    lam = bilipschitz_estimate(b, 20_000, 0, region=(-0.12, 0.12, -0.12, 0.12))
    assert b.lipschitz_bound == 2.0
    assert 1.5 < lam <= 2.0 + 1e-9
    with pytest.raises(InvalidInputError):
        BumpMap([0, 0], [0.2, 0], 0.1)
    with pytest.raises(InvalidInputError):
        make_bump([0.95, 0], [0.95, 0.01], 0.1)


def steer(K=8):
    # two generic Halton sets crowd each other quickly, so a short run with a loose lam
    V = HaltonEnumeration(3, 1)
    W = HaltonEnumeration(3, 2)
    budget = SteeringBudget(4.0, 0.2, K, "polynomial")
    return V, W, budget, build_steering(V, W, budget)


def test_steering_hits_targets_within_budget():
    V, W, budget, res = steer()
    rep = verify_steering(res.h, V, W, 8, budget, grid=60, pairs=4000, stages=res.stages)
    assert rep["membership"] and rep["boundary_identity"] and rep["passed"]
    assert rep["sup_displacement"] < 0.2 and rep["empirical_lambda"] < 4.0
    assert rep["cauchy_ok"]
    # later bumps leave earlier targets alone
    for st_ in res.stages:
        y = forward(res.h, st_.x[None])[0]
        assert np.array_equal(y, st_.y) and W.contains(st_.family, y)
    assert np.array_equal(forward(res.h, square_boundary_samples(400)), square_boundary_samples(400))


def test_partial_compositions_converge():
    V, W, budget, res = steer()
    G = np.random.default_rng(0).uniform(-1, 1, (500, 2))
    prev = G
    for k in range(1, 9):
        cur = forward(res.partial(k), G)
        assert np.max(np.hypot(*(cur - prev).T)) < budget.epsilons[k - 1]
        prev = cur


def test_fiber_family_targets():
    lay = CombBands(3, 1000)
    W = FiberFamilies(lay)
    z = np.array([0.3, 0.4])
    for n in range(3):
        y, _ = W.find(n, z, 1e-3)
        assert y[0] == z[0] and W.contains(n, y) and abs(y[1] - z[1]) < 1e-3
    with pytest.raises(EnumerationDepthError):
        W.find(0, z, 1e-9)
    V = HaltonEnumeration(3, 4)
    res = build_steering(V, W, SteeringBudget(2.0, 0.2, 12, "polynomial"))
    assert verify_steering(res.h, V, W, 12)["membership"]


def test_sparse_targets_raise_enumeration_depth_error():
    V = HaltonEnumeration(1, 0)
    W = ExplicitEnumeration([[[0.9, 0.9]]])
    with pytest.raises(EnumerationDepthError):
        build_steering(V, W, SteeringBudget(2.0, 0.2, 4))


def test_first_stage_by_hand():
    # default schedule: lambda_1 = 2^(1/4), eps_1 = 0.05, tau_1 = 1, so the bound is
    # min(0.05, (2^(1/4) - 1) / 2^(1/4)) = 0.05 and the first W entry strictly inside it wins
    budget = SteeringBudget(2.0, 0.2, 1)
    assert budget.lambdas[0] == 2.0 ** 0.25 and budget.epsilons[0] == 0.05
    V = ExplicitEnumeration([[[0.0, 0.0]]])
    W = ExplicitEnumeration([[[0.05, 0.0], [0.03, 0.0], [0.01, 0.0]]])
    res = build_steering(V, W, budget)
    st_ = res.stages[0]
    assert st_.tau == 1.0 and st_.bound == 0.05 and st_.target_index == 1
    assert np.array_equal(forward(res.h, [[0.0, 0.0]])[0], [0.03, 0.0])
    rep = verify_steering(res.h, V, W, 1, budget)
    assert rep["passed"] and rep["sup_displacement"] == pytest.approx(0.03, abs=1e-3)


def test_zero_stages_is_the_identity():
    V = HaltonEnumeration(2, 0)
    budget = SteeringBudget(2.0, 0.2, 0)
    res = build_steering(V, V, budget)
    assert isinstance(res.h, Identity) and res.residual == 0.2
    rep = verify_steering(res.h, V, V, 0, budget)
    assert rep["passed"] and rep["sup_displacement"] == 0.0


def test_later_stages_keep_earlier_targets():
    V = ExplicitEnumeration([[[0.0, 0.0], [0.5, 0.5]]])
    W = ExplicitEnumeration([[[0.02, 0.01], [0.51, 0.49]]])
    res = build_steering(V, W, SteeringBudget(2.0, 0.2, 2))
    y1 = forward(res.partial(1), [[0.0, 0.0]])[0]
    assert np.array_equal(y1, [0.02, 0.01])
    assert np.array_equal(forward(res.h, [[0.0, 0.0]])[0], y1)
    # the second ball stops short of the first target
    assert res.stages[1].tau <= np.hypot(*(res.stages[1].z - y1))


def test_removing_a_bump_breaks_membership_at_that_stage():
    V, W, budget, res = steer()
    for j in (1, 4):
        bumps = [b for k, b in enumerate(res.bumps, 1) if k != j]
        rep = verify_steering(Compose(bumps[::-1]), V, W, 8, budget)
        assert not rep["membership"] and rep["membership_failures"][0] == j


def test_bump_bound_covers_sampled_ratio():
    b = make_bump([0.0, 0.0], [0.05, 0.0], 1.0, require_inside=False)
    assert np.array_equal(forward(b, [[0.0, 0.0]])[0], [0.05, 0.0])
    assert np.array_equal(forward(b, [[0.9, 0.9]])[0], [0.9, 0.9])
    assert bilipschitz_estimate(b, 1000, 0) <= b.lipschitz_bound <= 1 / 0.95 + 0.05 + 1
    assert BumpMap([0.1, 0.1], [0.1, 0.1], 0.2).lipschitz_bound == 1.0
