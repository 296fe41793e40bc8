"""Normed integer lattices over Q: degree, slope, maximal slope, heights of maps.

Conventions.  ``deg(E) = log vol{x : ||x|| <= 1} - N log 2 - log covol``,
with the lattice always the standard ``Z^N`` (covolume 1).  The trivial
lattice (max norm) has degree 0 and a rank-one lattice generated by ``v``
has degree ``-log ||v||``.

With this normalization Minkowski's second theorem reads
``-sum log lambda_i - log N! <= deg(E) <= -sum log lambda_i`` and, applied to
every sublattice, gives ``mu_max(E) = -log lambda_1(E)`` exactly: a rank-r
sublattice F has ``deg F / r <= -log lambda_1(F) <= -log lambda_1(E)``, and
the line through a shortest vector attains the bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import CapExceeded, HypothesisFailure
from .heights import AdelicMetric, AlgebraicPoint, height
from .reduction import fincke_pohst, integer_rank, lll

MC_RANK_CAP = 10
KINDS = ("max", "diagonal", "linear", "oracle")


@dataclass(frozen=True)
class Estimate:
    """A number with either ``exact=True`` or a Monte Carlo standard error."""

    value: float
    std_error: float = 0.0
    exact: bool = True
    samples: int | None = None
    seed: int | None = None

    def __float__(self) -> float:
        return self.value

    def scale(self, c: float) -> "Estimate":
        return Estimate(self.value * c, self.std_error * abs(c), self.exact, self.samples, self.seed)

    def shift(self, c: float) -> "Estimate":
        return Estimate(self.value + c, self.std_error, self.exact, self.samples, self.seed)

    def to_json(self) -> dict:
        if self.exact:
            return {"estimate": self.value, "exact": True}
        return {"estimate": self.value, "std_error": self.std_error, "samples": self.samples, "seed": self.seed}


@dataclass(eq=False)
class AdelicLattice:
    """``Z^N`` with an archimedean norm.

    kinds:
      ``max``       ``max_i |x_i|``
      ``diagonal``  ``max_i exp(-a_i) |x_i|``
      ``linear``    ``max_i exp(-a_i) |(M x)_i|`` for invertible real ``M``
      ``oracle``    any callable norm, plus ``lower_gram`` ``G`` with
                    ``sqrt(x^T G x) <= ||x||`` (used for enumeration and sampling)
    """

    rank: int
    kind: str = "max"
    shifts: np.ndarray | None = None
    matrix: np.ndarray | None = None
    oracle: Callable | None = None
    lower_gram: np.ndarray | None = None
    minima_hint: Callable | None = None  # returns (lambda_1 lower, upper) for oracle lattices
    label: str = ""

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be positive")
        if self.kind not in KINDS:
            raise ValueError(f"unknown lattice kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in ("diagonal", "linear"):
            a = np.zeros(self.rank) if self.shifts is None else np.asarray(self.shifts, dtype=float)
            if a.shape != (self.rank,):
                raise ValueError("shifts must have length rank")
            self.shifts = a
        if self.kind == "linear":
            M = np.asarray(self.matrix, dtype=float)
            if M.shape != (self.rank, self.rank) or abs(np.linalg.det(M)) < 1e-300:
                raise ValueError("linear lattices need an invertible rank x rank matrix")
            self.matrix = M
        if self.kind == "oracle" and (self.oracle is None or self.lower_gram is None):
            raise ValueError("oracle lattices need a norm callable and a lower_gram matrix")

    @classmethod
    def standard(cls, rank: int) -> "AdelicLattice":
        return cls(rank, "max")

    @classmethod
    def diagonal(cls, shifts: Sequence[float]) -> "AdelicLattice":
        return cls(len(shifts), "diagonal", shifts=np.asarray(shifts, dtype=float))

    @classmethod
    def linear(cls, matrix, shifts: Sequence[float] | None = None) -> "AdelicLattice":
        M = np.asarray(matrix, dtype=float)
        return cls(M.shape[0], "linear", shifts=None if shifts is None else np.asarray(shifts, float), matrix=M)

    @classmethod
    def from_sections(cls, space) -> "AdelicLattice":
        """The lattice ``E_n`` of integer sections with the certified sup norm."""
        from .asympt import successive_minima

        def lam1():
            F = successive_minima(space)
            return F.lower[0], F.upper[0]

        return cls(space.rank, "oracle", oracle=lambda x: float(space.sup_norm(x)),
                   lower_gram=space.lower_gram(), minima_hint=lam1, label=f"E_{space.n}")

    def _affine(self) -> tuple[np.ndarray, np.ndarray]:
        """``(M, a)`` so that the norm is ``max_i e^{-a_i} |(M x)_i|``."""
        if self.kind == "max":
            return np.eye(self.rank), np.zeros(self.rank)
        if self.kind == "diagonal":
            return np.eye(self.rank), self.shifts
        if self.kind == "linear":
            return self.matrix, self.shifts
        raise TypeError("oracle lattices have no affine description")

    @property
    def polyhedral(self) -> bool:
        return self.kind != "oracle"

    def norm(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == "oracle":
            return float(self.oracle(x))
        M, a = self._affine()
        return float(np.max(np.exp(-a) * np.abs(M @ x)))

    def gram(self) -> np.ndarray:
        """A form with ``sqrt(x^T G x) <= ||x||``."""
        if self.kind == "oracle":
            return np.asarray(self.lower_gram, dtype=float)
        M, a = self._affine()
        DM = np.exp(-a)[:, None] * M
        return DM.T @ DM / self.rank

    def to_json(self) -> dict:
        out: dict = {"rank": self.rank, "kind": self.kind}
        if self.shifts is not None:
            out["shifts"] = [float(v) for v in self.shifts]
        if self.matrix is not None:
            out["matrix"] = [[float(v) for v in row] for row in self.matrix]
        if self.label:
            out["label"] = self.label
        return out


def _unit_ball_log_volume(N: int) -> float:
    return 0.5 * N * math.log(math.pi) - gammaln(0.5 * N + 1)


def chi(E: AdelicLattice, samples: int = 20000, seed: int | None = None) -> Estimate:
    """Arakelov degree (the Euler characteristic normalized so the trivial lattice has 0).

    Closed form for polyhedral norms; otherwise Monte Carlo: the unit ball
    sits inside the ellipsoid ``x^T G x <= 1`` and we sample that uniformly.
    """
    if E.polyhedral:
        M, a = E._affine()
        return Estimate(float(np.sum(a) - math.log(abs(np.linalg.det(M)))))
    N = E.rank
    if N > MC_RANK_CAP:
        raise CapExceeded(f"Monte Carlo volume needs rank <= {MC_RANK_CAP}, got {N}")
    if seed is None:
        raise ValueError("Monte Carlo degree needs an explicit seed")
    rng = np.random.default_rng(seed)
    G = E.gram()
    L = np.linalg.cholesky(0.5 * (G + G.T))
    y = rng.standard_normal((samples, N))
    y *= (rng.random(samples) ** (1.0 / N) / np.linalg.norm(y, axis=1))[:, None]
    x = np.linalg.solve(L.T, y.T).T
    vals = _batch_norm(E, x)
    hits = int(np.sum(vals <= 1.0))
    if hits == 0:
        raise CapExceeded("Monte Carlo volume estimate has no hits; increase samples")
    p = hits / samples
    log_vol = math.log(p) + _unit_ball_log_volume(N) - 0.5 * math.log(np.linalg.det(G))
    se = math.sqrt((1 - p) / (p * samples))
    return Estimate(log_vol - N * math.log(2), se, False, samples, seed)


def _batch_norm(E: AdelicLattice, x: np.ndarray) -> np.ndarray:
    batch = getattr(E.oracle, "batch", None)
    if batch is not None:
        return np.asarray(batch(x))
    return np.array([E.norm(v) for v in x])


def degree(E: AdelicLattice, samples: int = 20000, seed: int | None = None) -> Estimate:
    return chi(E, samples, seed)


def slope(E: AdelicLattice, samples: int = 20000, seed: int | None = None) -> Estimate:
    return chi(E, samples, seed).scale(1.0 / E.rank)


@dataclass(frozen=True)
class SlopeBound:
    lower: float
    upper: float
    exact: bool
    method: str

    @property
    def value(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def __float__(self) -> float:
        return self.value

    def to_json(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "exact": self.exact, "method": self.method}


def shortest_vector(E: AdelicLattice, limit: int = 200_000) -> tuple[tuple[int, ...], float, float]:
    """``(v, lower, upper)`` bracketing ``lambda_1`` for the lattice norm."""
    if E.kind == "max":
        return (1,) + (0,) * (E.rank - 1), 1.0, 1.0
    if E.kind == "diagonal":
        i = int(np.argmax(E.shifts))
        v = tuple(int(j == i) for j in range(E.rank))
        lam = math.exp(-E.shifts[i])
        return v, lam, lam
    if E.kind == "oracle" and E.minima_hint is not None:
        lo, up = E.minima_hint()
        return (), lo, up
    G = E.gram()
    B = lll(G)
    best_v, best = None, math.inf
    for row in B:
        v = E.norm(row)
        if v < best:
            best_v, best = tuple(int(c) for c in row), v
    for x in fincke_pohst(G, best, limit, B):
        v = E.norm(x)
        if v < best:
            best_v, best = x, v
    return best_v, best, best


def mu_max(E: AdelicLattice) -> SlopeBound:
    """Maximal slope; equals ``-log lambda_1`` (see module docstring)."""
    if E.rank == 1:
        s = slope(E).value if E.polyhedral else -math.log(E.norm([1]))
        return SlopeBound(s, s, True, "rank-one")
    _, lo, up = shortest_vector(E)
    return SlopeBound(-math.log(up), -math.log(lo), lo == up, "shortest-line")


def _rational_matrix(A) -> list[list[Fraction]]:
    return [[Fraction(v) if not isinstance(v, float) else Fraction(v).limit_denominator(10**12) for v in row]
            for row in A]


def rational_content(A) -> Fraction:
    """gcd of the numerators over lcm of the denominators of the entries."""
    num, den = 0, 1
    for row in _rational_matrix(A):
        for q in row:
            num = math.gcd(num, q.numerator)
            den = den * q.denominator // math.gcd(den, q.denominator)
    return Fraction(num, den)


@dataclass(eq=False)
class LinearMapWithHeight:
    """Rational matrix ``A`` (target rank x source rank) between normed lattices."""

    matrix: Sequence[Sequence]
    source: AdelicLattice
    target: AdelicLattice

    def __post_init__(self):
        rows = [list(r) for r in self.matrix]
        if len(rows) != self.target.rank or any(len(r) != self.source.rank for r in rows):
            raise ValueError("matrix shape must be (target rank, source rank)")
        self.matrix = rows

    @property
    def array(self) -> np.ndarray:
        return np.array([[float(Fraction(v)) for v in r] for r in self.matrix])

    @property
    def is_zero(self) -> bool:
        return all(Fraction(v) == 0 for r in self.matrix for v in r)

    @property
    def injective(self) -> bool:
        R = _rational_matrix(self.matrix)
        den = 1
        for r in R:
            for q in r:
                den = den * q.denominator // math.gcd(den, q.denominator)
        cols = [[int(R[i][j] * den) for i in range(len(R))] for j in range(self.source.rank)]
        return integer_rank(cols) == self.source.rank


@dataclass(frozen=True)
class MapHeight:
    archimedean: float
    finite: float
    exact: bool

    @property
    def value(self) -> float:
        return self.archimedean + self.finite

    def __float__(self) -> float:
        return self.value

    def to_json(self) -> dict:
        return {"archimedean": self.archimedean, "finite": self.finite, "total": self.value, "exact": self.exact}


def _operator_log_norm(f: LinearMapWithHeight, seed: int = 0, trials: int = 64) -> tuple[float, bool]:
    A = f.array
    E, F = f.source, f.target
    if E.polyhedral and F.polyhedral:
        ME, a = E._affine()
        MF, b = F._affine()
        T = (np.exp(-b)[:, None] * MF) @ A @ np.linalg.inv(ME) @ np.diag(np.exp(a))
        return math.log(float(np.max(np.sum(np.abs(T), axis=1)))), True
    # projected ascent from random starts: a lower estimate of the operator norm
    from scipy.optimize import minimize

    rng = np.random.default_rng(seed)
    best = 0.0

    def neg_ratio(x):
        nx = E.norm(x)
        return -F.norm(A @ x) / nx if nx > 0 else 0.0

    for _ in range(trials):
        x0 = rng.standard_normal(E.rank)
        res = minimize(neg_ratio, x0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12})
        best = max(best, -res.fun, -neg_ratio(x0))
    return math.log(best), False


def hom_height(f: LinearMapWithHeight) -> MapHeight:
    """``h(f) = sum_v log ||f||_v``.

    The finite part is ``-log c`` where ``c`` is the rational content of the
    matrix: the p-adic operator norm of a matrix on ``Z_p`` lattices with max
    norms is its largest entry.
    """
    if f.is_zero:
        raise ValueError("height of the zero map is -infinity")
    arch, exact = _operator_log_norm(f)
    c = rational_content(f.matrix)
    return MapHeight(arch, -math.log(c.numerator) + math.log(c.denominator), exact)


@dataclass
class SlopeInequalityReport:
    mu_source: SlopeBound
    mu_target: SlopeBound
    height: MapHeight
    slack: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.slack >= -self.tol

    def to_json(self) -> dict:
        return {"mu_max_source": self.mu_source.to_json(), "mu_max_target": self.mu_target.to_json(),
                "height": self.height.to_json(), "slack": self.slack, "tol": self.tol, "ok": self.ok}


def slope_inequality_check(f: LinearMapWithHeight, tol: float = 1e-9) -> SlopeInequalityReport:
    """``mu_max(E) <= mu_max(F) + h(f)`` for injective ``f``; slack uses the worst-case brackets."""
    if not f.injective:
        raise HypothesisFailure("slope inequality needs an injective map")
    me, mf = mu_max(f.source), mu_max(f.target)
    h = hom_height(f)
    slack = mf.lower + h.value - me.upper
    return SlopeInequalityReport(me, mf, h, slack, tol)


@dataclass
class EvaluationBoundReport:
    n: int
    mu_max: SlopeBound
    rhs: float
    chosen: list
    status: str  # "holds" | "violated" | "inconclusive"

    @property
    def ok(self) -> bool:
        return self.status == "holds"

    def to_json(self) -> dict:
        return {"n": self.n, "mu_max": self.mu_max.to_json(), "rhs": self.rhs,
                "points": self.chosen, "status": self.status}


def evaluation_bound_check(points: Sequence[AlgebraicPoint], M: AdelicMetric, n: int,
                           method: str = "auto") -> EvaluationBoundReport:
    """``mu_max(E_n) <= max_{P in B_n} n h(P) + log(n + 1)``.

    ``B_n`` is the cheapest subset (by height) whose geometric points number at
    least ``n + 1``, which makes the evaluation map on degree-n sections injective.
    """
    from .asympt import successive_minima
    from .sections import SectionSpace

    if n < 0:
        raise ValueError("n must be non-negative")
    pts = list(points)
    seen, uniq = set(), []
    for p in pts:
        key = None if p.is_infinity else p.minimal_polynomial.coefficients
        if key not in seen:
            seen.add(key)
            uniq.append(p)
    if sum(p.degree for p in uniq) < n + 1:
        raise HypothesisFailure(f"need at least {n + 1} distinct geometric points, got "
                                f"{sum(p.degree for p in uniq)}")
    hs = sorted(((height(p, M), p) for p in uniq), key=lambda t: t[0])
    chosen, count = [], 0
    for h, p in hs:
        chosen.append((p.label, h))
        count += p.degree
        if count >= n + 1:
            break
    rhs = n * max(h for _, h in chosen) + math.log(n + 1)
    F = successive_minima(SectionSpace(n, M), method=method)
    mm = SlopeBound(-math.log(F.upper[0]), -math.log(F.lower[0]), F.exact[0], "shortest-line")
    if mm.upper <= rhs + 1e-12:
        status = "holds"
    elif mm.lower > rhs + 1e-12:
        status = "violated"
    else:
        status = "inconclusive"
    return EvaluationBoundReport(n, mm, rhs, [{"point": lab, "height": h} for lab, h in chosen], status)


def random_injective_map(rng: np.random.Generator, max_rank: int = 2, coef: int = 3) -> LinearMapWithHeight:
    """An injective integer map ``Z^r1 -> Z^r2`` (``r1 <= r2 <= max_rank``) between random polyhedral lattices."""
    r1 = int(rng.integers(1, max_rank + 1))
    r2 = int(rng.integers(r1, max_rank + 1))
    while True:
        A = rng.integers(-coef, coef + 1, size=(r2, r1))
        M = rng.integers(-2, 3, size=(r1, r1))
        if abs(np.linalg.det(M)) < 0.5:
            continue
        f = LinearMapWithHeight(A.tolist(), AdelicLattice.linear(M, rng.normal(size=r1)),
                                AdelicLattice.diagonal(rng.normal(size=r2)))
        if f.injective:
            return f
