import math

import numpy as np
import pytest

from arakelov.equidist import (
    PhiEstimator,
    Verdict,
    additivity_verdict,
    base_convergence,
    default_dictionary,
    directional_derivative,
    fourier_twists,
    limit_measure,
    phi,
)
from arakelov.errors import HypothesisFailure
from arakelov.heights import AdelicMetric, MetricTwist

CAN = AdelicMetric("canonical")
U1 = MetricTwist.monomial(1, 0, 0)
U3 = MetricTwist.monomial(0, 0, 1)


@pytest.fixture(scope="module")
def cyclo():
    est = PhiEstimator({"kind": "cyclotomic", "max_conductor": 160}, CAN, window=10)
    est.extend(10**6)
    return est


def alternating(window=10, cycle=40):
    return PhiEstimator({"kind": "rational", "values": ["2", "1/2"], "cycle": cycle}, CAN, window=window)


def test_torsion_phi_is_zero(cyclo):
    for N in (20, 80, len(cyclo.points)):
        assert abs(phi(cyclo, N).value) <= 1e-10


def test_constant_point_phi():
    est = PhiEstimator({"kind": "rational", "values": ["2"], "cycle": 30}, CAN, window=5)
    r = phi(est, 30)
    assert r.value == pytest.approx(math.log(2), abs=1e-12) and r.stabilized


def test_u1_twist_tends_to_zero(cyclo):
    r = phi(cyclo, len(cyclo.points), twist=U1)
    assert abs(r.value) <= 0.1
    # orbit averages of Re z are mu(n)/phi(n)
    assert min(r.head[-10:]) == pytest.approx(r.value)


def test_refinement_keeps_cache():
    est = PhiEstimator({"kind": "cyclotomic", "max_conductor": 60}, CAN, window=5)
    a = est.heights(30).copy()
    est.extend(59)
    assert np.array_equal(est.heights(30), a)


def test_derivative_constant(cyclo):
    d = directional_derivative(cyclo, MetricTwist.constant(0.7), horizon=len(cyclo.points))
    assert all(v == pytest.approx(0.7, abs=1e-12) for v in d.per_m.values())


def test_derivative_u3_vanishes_on_equator(cyclo):
    assert abs(directional_derivative(cyclo, U3).value) <= 1e-12


def test_derivative_u1_squared_is_half(cyclo):
    # the orbit mean of cos^2 over primitive n-th roots is (1 + c_n(2)/phi(n))/2,
    # with c_n the Ramanujan sum; |c_n(2)| <= 2 so the tail deviates by at most 1/phi(n)
    d = directional_derivative(cyclo, MetricTwist.monomial(2, 0, 0))
    tail = cyclo.points[-cyclo.window:]
    slack = max(1 / p.degree for p in tail)
    assert abs(d.value - 0.5) <= slack + 1e-12


def test_superadditivity_of_liminf(cyclo):
    N = len(cyclo.points)
    for f in default_dictionary(2):
        for horizon in (40, 100, N):
            assert directional_derivative(cyclo, f, (1,), horizon).value + \
                directional_derivative(cyclo, -f, (1,), horizon).value <= 1e-12


def test_constant_shift_of_derivative(cyclo):
    f = MetricTwist.monomial(1, 1, 0)
    a = directional_derivative(cyclo, f, (1, 2)).value
    b = directional_derivative(cyclo, f + MetricTwist.constant(0.3), (1, 2)).value
    assert b == pytest.approx(a + 0.3, abs=1e-12)


def test_non_convergent_heights_refused():
    est = PhiEstimator({"kind": "rational", "values": ["2", "3"], "cycle": 20}, CAN, window=5)
    assert not base_convergence(est, 40)[0]
    with pytest.raises(HypothesisFailure):
        directional_derivative(est, U1, horizon=40)
    with pytest.raises(HypothesisFailure):
        additivity_verdict(est, [U1], 40)


def test_alternating_points_fail_with_u3():
    rep = additivity_verdict(alternating(), [U3, -U3], tol=1e-3)
    assert rep.verdict is Verdict.FAILS
    assert rep.max_gap == pytest.approx(1.2, abs=1e-12)  # u3(2) - u3(1/2) = 3/5 + 3/5


def test_alternating_points_u1_pair_is_additive():
    # u1(2) = u1(1/2) = 4/5, so no pair involving u1 alone separates the two points
    rep = additivity_verdict(alternating(), [U1, -U1], tol=1e-3)
    assert rep.verdict is Verdict.EQUIDISTRIBUTES and rep.max_gap <= 1e-12


def test_zero_dictionary_trivially_passes(cyclo):
    rep = additivity_verdict(cyclo, [MetricTwist.zero()])
    assert rep.verdict is Verdict.EQUIDISTRIBUTES


def test_verdict_invariant_liminf_equals_limsup():
    est = PhiEstimator({"kind": "rational", "values": ["3"], "cycle": 40}, CAN, window=10)
    dic = default_dictionary(2)
    rep = additivity_verdict(est, dic, tol=1e-3)
    assert rep.verdict is Verdict.EQUIDISTRIBUTES
    N = len(est.points)
    for f in dic:
        a = est.averages(f, N)[N - est.window:]
        assert a.max() - a.min() <= 2e-3


def test_limit_measure_of_constant_sequence_is_dirac():
    est = PhiEstimator({"kind": "rational", "values": ["2"], "cycle": 30}, CAN, window=5)
    lm = limit_measure(est, [U1, U3])
    assert lm.moments["1*u1"] == pytest.approx(0.8) and lm.moments["1*u3"] == pytest.approx(0.6)
    assert lm.density is None  # not on the circle


def test_limit_measure_refuses_unless_equidistributed():
    est = alternating()
    with pytest.raises(HypothesisFailure):
        limit_measure(est, [U3, -U3])


def test_forced_limit_measure_close_to_haar(cyclo):
    lm = limit_measure(cyclo, force=True)
    assert lm.forced and lm.w1_to_haar <= 0.05


def test_fourier_twists_on_circle():
    fr, fi = fourier_twists(3)
    t = 0.7
    u = (math.cos(t), math.sin(t), 0.0)
    assert fr(*u) == pytest.approx(math.cos(3 * t)) and fi(*u) == pytest.approx(math.sin(3 * t))


def test_report_json_shape(cyclo):
    rep = additivity_verdict(cyclo, [U1, U3]).to_json()
    assert set(rep) >= {"verdict", "per_pair", "horizon", "window", "tol"}
    assert set(rep["per_pair"][0]) >= {"f", "g", "D_f", "D_g", "D_fg", "gap"}
