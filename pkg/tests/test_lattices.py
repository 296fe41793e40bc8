import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from arakelov.errors import CapExceeded, HypothesisFailure
from arakelov.heights import AdelicMetric, AlgebraicPoint
from arakelov.lattices import (
    AdelicLattice,
    LinearMapWithHeight,
    chi,
    evaluation_bound_check,
    hom_height,
    mu_max,
    random_injective_map,
    rational_content,
    shortest_vector,
    slope,
    slope_inequality_check,
)
from arakelov.reduction import fincke_pohst, greedy_minima, integer_rank, lll


def box_minima(E):
    # brute force over a box that provably contains every vector of norm <= max ||e_i||
    M, a = E._affine()
    R = max(E.norm(e) for e in np.eye(E.rank))
    r = int(math.floor(R * np.max(np.sum(np.abs(np.linalg.inv(M)) * np.exp(a)[None, :], axis=1)) + 1e-9))
    pts = [x for x in itertools.product(range(-r, r + 1), repeat=E.rank) if any(x)]
    return greedy_minima(pts, [E.norm(x) for x in pts], E.rank)


def random_linear(rng, N):
    while True:
        M = rng.integers(-2, 3, (N, N)).astype(float) + np.eye(N) * 2
        if abs(np.linalg.det(M)) > 0.5:
            return AdelicLattice.linear(M, 0.3 * rng.standard_normal(N))


def test_trivial_lattice_degree_zero():
    assert chi(AdelicLattice.standard(4)).value == 0.0


def test_diagonal_degree_and_slope():
    E = AdelicLattice.diagonal([0.3, 0.7, -0.1])
    assert chi(E).value == pytest.approx(0.9)
    assert slope(E).value == pytest.approx(0.3)
    assert mu_max(E).value == pytest.approx(0.7)


def test_rank_one_slope():
    E = AdelicLattice.diagonal([1.25])
    m = mu_max(E)
    assert m.exact and m.value == pytest.approx(1.25)


def test_monte_carlo_agrees_with_closed_form():
    E = AdelicLattice.linear([[1, 1], [0, 2]], [0.2, -0.4])
    orc = AdelicLattice(2, "oracle", oracle=E.norm, lower_gram=E.gram())
    exact = chi(E).value
    est = chi(orc, 40000, seed=1)
    assert not est.exact
    assert abs(est.value - exact) <= 4 * est.std_error


def test_monte_carlo_needs_seed_and_cap():
    orc = AdelicLattice(2, "oracle", oracle=lambda x: float(np.max(np.abs(x))), lower_gram=np.eye(2) / 2)
    with pytest.raises(ValueError):
        chi(orc)
    big = AdelicLattice(11, "oracle", oracle=lambda x: 1.0, lower_gram=np.eye(11))
    with pytest.raises(CapExceeded):
        chi(big, seed=0)


@pytest.mark.parametrize("seed", range(6))
def test_minkowski_second_theorem(seed):
    rng = np.random.default_rng(seed)
    E = random_linear(rng, 2 + seed % 2)
    lam = box_minima(E)
    s = -sum(math.log(v) for v in lam)
    d = chi(E).value
    assert s - math.lgamma(E.rank + 1) - 1e-9 <= d <= s + 1e-9


@pytest.mark.parametrize("seed", range(6))
def test_mu_max_is_minus_log_lambda1(seed):
    rng = np.random.default_rng(100 + seed)
    E = random_linear(rng, 3)
    lam = box_minima(E)
    assert mu_max(E).value == pytest.approx(-math.log(lam[0]), abs=1e-12)
    # every coordinate sublattice respects the bound
    for k in range(1, E.rank):
        for cols in itertools.combinations(range(E.rank), k):
            G = E.gram()[np.ix_(cols, cols)]
            sub = AdelicLattice(k, "oracle", oracle=lambda y, c=cols: E.norm(_embed(y, c, E.rank)), lower_gram=G)
            assert chi(sub, 20000, seed=seed).value / k <= mu_max(E).value + 0.05


def _embed(y, cols, N):
    x = np.zeros(N)
    x[list(cols)] = y
    return x


def test_hom_height_examples():
    std = AdelicLattice.standard(2)
    assert hom_height(LinearMapWithHeight([[1, 1], [0, 1]], std, std)).value == pytest.approx(math.log(2))
    h = hom_height(LinearMapWithHeight([[2, 0], [0, 4]], std, std))
    assert h.finite == pytest.approx(-math.log(2)) and h.archimedean == pytest.approx(math.log(4))
    looser = hom_height(LinearMapWithHeight([[1, 0], [0, 1]], std, AdelicLattice.diagonal([0.4, 0.4])))
    assert looser.value == pytest.approx(-0.4)


def test_rational_content():
    assert rational_content([["1/2", "3/4"], [0, "5/2"]]) == pytest.approx(0.25)


def test_slope_inequality_randomized(rng):
    failures = [slope_inequality_check(random_injective_map(rng)) for _ in range(100)]
    assert not [r for r in failures if not r.ok]


def test_slope_inequality_tight_for_identity():
    E = AdelicLattice.diagonal([0.5, -0.2])
    r = slope_inequality_check(LinearMapWithHeight([[1, 0], [0, 1]], E, E))
    assert r.slack == pytest.approx(0.0, abs=1e-12)


def test_slope_inequality_refuses_non_injective():
    std = AdelicLattice.standard(2)
    with pytest.raises(HypothesisFailure):
        slope_inequality_check(LinearMapWithHeight([[1, 1], [1, 1]], std, std))
    with pytest.raises(ValueError):
        hom_height(LinearMapWithHeight([[0, 0], [0, 0]], std, std))


@pytest.mark.parametrize("n", [0, 4, 8, 12])
def test_evaluation_bound_families(n):
    M = AdelicMetric()
    tors = evaluation_bound_check([AlgebraicPoint.cyclotomic(k) for k in range(1, n + 3)], M, n)
    ints = evaluation_bound_check([AlgebraicPoint.rational(k) for k in range(0, n + 2)], M, n)
    assert tors.status == "holds" and ints.status == "holds"


def test_evaluation_bound_needs_enough_points():
    with pytest.raises(HypothesisFailure):
        evaluation_bound_check([AlgebraicPoint.rational(2)], AdelicMetric(), 3)


def test_shortest_vector_linear():
    E = AdelicLattice.linear([[1, 0], [3, 1]])
    v, lo, up = shortest_vector(E)
    assert lo == up == pytest.approx(1.0)


@given(st.integers(0, 1000))
def test_lll_preserves_lattice_and_fp_is_complete(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3)) + 2 * np.eye(3)
    Q = A.T @ A
    B = lll(Q)
    assert abs(round(np.linalg.det(B))) == 1
    pts = fincke_pohst(Q, 2.0, B=B)
    brute = {x for x in itertools.product(range(-6, 7), repeat=3)
             if any(x) and np.array(x) @ Q @ np.array(x) <= 4.0 - 1e-9}
    got = set(pts) | {tuple(-v for v in x) for x in pts}
    assert brute <= got


def test_integer_rank():
    assert integer_rank([(1, 2, 3), (2, 4, 6), (0, 1, 1)]) == 2
