import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import wasserstein_distance

from arakelov.errors import MeasureError
from arakelov.measures import (
    EmpiricalMeasure,
    StepMeasure,
    integrate,
    moments_to_circle_density,
    sphere_coords,
    step_moment,
    wasserstein_circle,
    wasserstein_line,
)

angles = st.lists(st.floats(0, 2 * math.pi, allow_nan=False, exclude_max=True), min_size=1, max_size=12)


def cyclic_matching_oracle(ta, tb):
    # equal-count uniform measures on the circle: optimal plans are cyclic shifts of sorted orders
    a, b = np.sort(ta), np.sort(tb)
    n = len(a)
    best = math.inf
    for k in range(n):
        d = np.abs(a - np.roll(b, k))
        best = min(best, float(np.mean(np.minimum(d, 2 * np.pi - d))))
    return best


def test_sphere_coords_special_points():
    u1, u2, u3 = sphere_coords(np.array([0, 1, 1j, complex("inf")]))
    assert np.allclose(u3, [-1, 0, 0, 1])
    assert np.allclose(u1, [0, 1, 0, 0]) and np.allclose(u2, [0, 0, 1, 0])


def test_weights_must_sum_to_one():
    with pytest.raises(MeasureError):
        EmpiricalMeasure(np.array([1, 2]), np.array([0.5, 0.6]))


def test_integrate_rejects_pole():
    m = EmpiricalMeasure.uniform([0, 1])
    with pytest.raises(MeasureError), np.errstate(divide="ignore"):
        integrate(lambda z: 1 / abs(z), m)
    assert integrate(lambda z: abs(z), m) == 0.5


def test_w1_quarter_turn():
    assert wasserstein_circle(EmpiricalMeasure.dirac(1), EmpiricalMeasure.dirac(1j)) == pytest.approx(math.pi / 2)


def test_w1_antipodal_not_more_than_pi():
    assert wasserstein_circle(EmpiricalMeasure.dirac(1), EmpiricalMeasure.dirac(-1)) == pytest.approx(math.pi)


@given(angles)
def test_w1_matches_cyclic_matching(ta):
    rng = np.random.default_rng(len(ta))
    tb = rng.uniform(0, 2 * np.pi, len(ta))
    a = EmpiricalMeasure.uniform(np.exp(1j * np.array(ta)))
    b = EmpiricalMeasure.uniform(np.exp(1j * tb))
    assert wasserstein_circle(a, b) == pytest.approx(cyclic_matching_oracle(ta, tb), abs=1e-9)


@given(angles, angles)
def test_w1_symmetric_and_triangle(ta, tb):
    a = EmpiricalMeasure.uniform(np.exp(1j * np.array(ta)))
    b = EmpiricalMeasure.uniform(np.exp(1j * np.array(tb)))
    c = EmpiricalMeasure.haar_grid(7)
    ab = wasserstein_circle(a, b)
    assert ab == pytest.approx(wasserstein_circle(b, a), abs=1e-12)
    assert ab <= wasserstein_circle(a, c) + wasserstein_circle(c, b) + 1e-12


def test_w1_off_circle_rejected():
    with pytest.raises(MeasureError):
        wasserstein_circle(EmpiricalMeasure.dirac(2), EmpiricalMeasure.dirac(1))


def test_step_measure_merges_ties():
    m = StepMeasure.from_values([0.0, 0.0, 1.0, 2.0])
    assert np.allclose(m.breakpoints, [0, 1, 2]) and np.allclose(m.masses, [0.5, 0.25, 0.25])


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=20))
def test_step_moment_chain(v):
    m = StepMeasure.from_values(v)
    sup, pos, mean = (step_moment(m, k) for k in ("sup-support", "positive-part-mean", "mean"))
    assert pos >= mean - 1e-12
    assert sup >= mean - 1e-12
    if sup > 0:
        assert sup >= pos - 1e-12


def test_step_moment_dirac():
    m = StepMeasure.dirac(0.25)
    assert step_moment(m, "mean") == step_moment(m, "sup-support") == 0.25


@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=10),
       st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=10))
def test_w1_line_matches_scipy(a, b):
    ma, mb = StepMeasure.from_values(a), StepMeasure.from_values(b)
    assert wasserstein_line(ma, mb) == pytest.approx(wasserstein_distance(a, b), abs=1e-9)


def test_json_round_trips():
    m = EmpiricalMeasure.uniform([1, 1j, complex("inf")])
    back = EmpiricalMeasure.from_json(m.to_json())
    assert np.all(back.points[:2] == m.points[:2]) and np.isinf(back.points[2])
    s = StepMeasure.from_values([0.1, 0.3])
    assert np.allclose(StepMeasure.from_json(s.to_json()).breakpoints, s.breakpoints)


def test_density_from_haar_moments_is_flat():
    d = moments_to_circle_density([1.0, 0, 0, 0])
    assert d.sup_deviation <= 1e-12


def test_density_reproduces_first_moment():
    c1 = 0.3 + 0.1j
    d = moments_to_circle_density([1.0, c1])
    m = d.as_measure()
    got = np.sum(m.weights * np.exp(-1j * np.angle(m.points)))
    # Fejer weights damp c_1 by (1 - 1/2)
    assert abs(got - 0.5 * c1) <= 1e-6 or abs(np.conj(got) - 0.5 * c1) <= 1e-6


def test_density_rejects_non_hermitian():
    with pytest.raises(MeasureError):
        moments_to_circle_density([1.0 + 0.5j, 0.2])
