import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from squarelimits import analysis as an
from squarelimits.errors import InvalidInputError
from squarelimits.map_algebra import AnnulusRotation, BaseF02, Identity
from squarelimits.steering import BumpMap

F02 = BaseF02()


def test_f02_limits_are_edge_points():
    om = an.estimate_limit_set(F02, (0.3, 0.0), an.OMEGA, 50, 200)
    al = an.estimate_limit_set(F02, (0.3, 0.0), an.ALPHA, 50, 200)
    assert om.hausdorff_to([[0.3, 1.0]]) < 1e-12 and al.hausdorff_to([[0.3, -1.0]]) < 1e-12
    assert om.diagnostic < 1e-12
    rows = om.to_rows()
    assert len(rows) == 200 and rows[0][0] == 51 and rows[-1][0] == 250
    assert om.distance_to(al) == pytest.approx(2.0)
    with pytest.raises(InvalidInputError):
        an.estimate_limit_set(F02, (0.3, 0.0), "sideways", 10, 10)
    with pytest.raises(InvalidInputError):
        an.limit_tails(F02, [(0.3, 0.0)], an.OMEGA, 0, 10)


def test_identity_limit_is_the_point():
    e = an.estimate_limit_set(Identity(), (0.3, -0.2), an.OMEGA, 10, 50)
    assert np.all(e.cloud.points == [0.3, -0.2]) and e.diagnostic == 0.0


def test_batch_estimates_match_single_ones():
    P = np.array([[0.1, 0.2], [-0.4, 0.5], [0.7, -0.3]])
    m = BumpMap([0.0, 0.0], [0.1, 0.05], 0.5) @ F02
    batch = an.estimate_limit_sets(m, P, an.ALPHA, 30, 100)
    for p, e in zip(P, batch):
        assert np.array_equal(e.cloud.points, an.estimate_limit_set(m, p, an.ALPHA, 30, 100).cloud.points)


def test_irrational_rotation_fills_its_circle():
    A = AnnulusRotation()
    y = (np.sqrt(5) - 1) / 2
    e = an.estimate_limit_set(A, (0.0, y), an.OMEGA, 1000, 1000)
    t = np.linspace(0, 1, 4000, endpoint=False)
    circle = A.embed(t, np.full_like(t, y))
    assert e.hausdorff_to(circle) < 0.01
    r = an.estimate_limit_set(A, (0.0, 0.25), an.OMEGA, 10, 2000)
    assert len(np.unique(np.round(r.cloud.points[:, 0], 9))) == 4


def test_transport_discrepancy_is_zero_for_trivial_collapse():
    m = BumpMap([0.0, 0.0], [0.1, 0.05], 0.5) @ F02
    d = an.limit_transport_discrepancy(m, m, Identity(), [[0.1, 0.2], [-0.5, 0.4]], 20, 100)
    assert np.all(d == 0.0)


def test_witness_search_and_certificate_on_f02():
    centers = an.center_grid(F02, 2, 0.4)
    assert centers.shape == (4, 2)
    cert = an.sensitivity_certificate(F02, 3, 0.05, centers, 0.1, samples=60, N0=20, N1=50)
    assert cert.passed and cert.failure_report() is None
    for r in cert.centers:
        assert len(r.witnesses) == 3
        assert np.all(np.hypot(*(r.witnesses - r.center).T) <= 0.1 + 1e-12)
        # omega limits of f02 are the edge points above, so separations are abscissa gaps
        S = r.separations[an.OMEGA]
        gaps = np.abs(r.witnesses[:, None, 0] - r.witnesses[None, :, 0])
        assert np.allclose(S, gaps, atol=1e-12)
    assert an.replay_certificate(F02, cert)
    json.dumps(cert.to_dict())


def test_identity_is_not_sensitive():
    cert = an.sensitivity_certificate(Identity(), 2, 0.05, [[0.0, 0.0]], 0.01, samples=20, N0=5, N1=10)
    assert not cert.passed
    assert "worst center" in cert.failure_report()
    with pytest.raises(InvalidInputError):
        an.sensitivity_certificate(Identity(), 1, 0.05, [[0.0, 0.0]], 0.01)
    with pytest.raises(InvalidInputError):
        an.witness_search(Identity(), 2, 0.0, [[0.0, 0.0], [0.1, 0.1]])


def test_ball_samples_stay_in_the_domain():
    rng = np.random.default_rng(0)
    P = an.ball_samples(F02, (0.95, 0.0), 0.1, 500, rng)
    assert np.all(np.abs(P) <= 1.0)
    Q = an.ball_samples(AnnulusRotation(), (0.98, 0.5), 0.1, 500, rng)
    assert np.all((Q[:, 0] >= 0) & (Q[:, 0] < 1))


def test_nonwandering_fixed_check():
    edge = np.column_stack([np.linspace(-1, 1, 50), np.repeat([-1.0, 1.0], 25)])
    assert an.nonwandering_fixed_check(F02, edge, tol=0.0).passed
    bad = an.nonwandering_fixed_check(F02, [[0.0, 0.0], [0.2, 1.0]], tol=0.0)
    assert not bad.passed and bad.count == 2 and np.array_equal(bad.non_fixed, [[0.0, 0.0]])
    assert bad.max_displacement == pytest.approx(0.5)


def brute_separated(O, eps):
    n_max, N, _ = O.shape
    out = []
    for n in range(1, n_max + 1):
        chosen = []
        for i in range(N):
            if all(np.max(np.linalg.norm(O[:n, i] - O[:n, j], axis=1)) > eps for j in chosen):
                chosen.append(i)
        out.append(len(chosen))
    return np.array(out)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 25), st.just(2)),
              elements=st.floats(0, 1)), st.floats(0.01, 0.5))
def test_greedy_separated_matches_brute_force(O, eps):
    assert np.array_equal(an._greedy_separated(O, eps), brute_separated(O, eps))


def test_entropy_estimate():
    e = an.entropy_growth_estimate(Identity(), 0.05, 10, 80)
    assert np.all(e.counts == e.counts[0]) and e.slope == pytest.approx(0.0, abs=1e-12)
    assert "heuristic" in e.to_dict()["label"]
    assert an.entropy_growth_estimate(F02, 0.05, 20, 100).slope < 0.05
    with pytest.raises(InvalidInputError):
        an.entropy_growth_estimate(Identity(), 0.01, 10, 100)
