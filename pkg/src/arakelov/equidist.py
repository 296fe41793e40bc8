"""Liminf-height functionals along point sequences and the additivity test.

For a sequence ``x_n`` and a metric ``L``, ``phi(L)`` is the liminf of the
heights ``h_L(x_n)``.  Twisting by ``f`` adds the orbit average ``a_n(f)``
to each height, so everything below is computed from two cached tables per
point: base heights and integrals of sphere monomials.

Finite horizons are honest: ``phi`` is the minimum over a tail window, and a
value counts as stabilized only when the last two disjoint windows agree.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import HypothesisFailure
from .heights import AdelicMetric, AlgebraicPoint, MetricTwist, orbit_moments, sphere_monomials
from .measures import (
    CircleDensity,
    EmpiricalMeasure,
    moments_to_circle_density,
    wasserstein_circle,
)
from .polyalg import SequenceSpec, sequence_terms
from .semigroup import (  # noqa: F401  (the semigroup harness is part of this module's API)
    HalfSpaceSemigroup,
    HomogeneousFunctionOnSemigroup,
    SandwichReport,
    lemma_check,
    sandwich_differential,
)

DEFAULT_TOL = 1e-3
DEFAULT_DEGREE = 3


def points_from_spec(spec: SequenceSpec | Mapping) -> Iterator[AlgebraicPoint]:
    for q, meta in sequence_terms(spec):
        if q is None:
            yield AlgebraicPoint.infinity()
            continue
        label = f"Phi_{meta['conductor']}" if "conductor" in meta else str(q)
        yield AlgebraicPoint.from_polynomial(q, status=meta.get("irreducibility"), label=label)


class PhiEstimator:
    """Caches heights and orbit moments along a lazily generated sequence."""

    def __init__(self, sequence: Iterable[AlgebraicPoint] | SequenceSpec | Mapping, metric: AdelicMetric,
                 window: int = 25, max_degree: int = DEFAULT_DEGREE):
        if isinstance(sequence, (SequenceSpec, Mapping)):
            sequence = points_from_spec(sequence)
        if window < 1:
            raise ValueError("window must be >= 1")
        self._source = iter(sequence)
        self.metric = metric
        self.window = int(window)
        self.max_degree = int(max_degree)
        self.points: list[AlgebraicPoint] = []
        self._base: list[float] = []
        self._moments: list[dict] = []

    def extend(self, N: int) -> int:
        """Pull points until ``N`` are cached (or the sequence ends); returns the count."""
        while len(self.points) < N:
            try:
                x = next(self._source)
            except StopIteration:
                break
            i = len(self.points)
            try:
                base = x.base_heights[self.metric.base]
                mom = orbit_moments(x, self.max_degree)
            except Exception as exc:  # propagate with the index
                raise type(exc)(f"term {i + 1} ({x.label}): {exc}") from exc
            self.points.append(x)
            self._base.append(base)
            self._moments.append(mom)
        return len(self.points)

    def _check_horizon(self, N: int) -> int:
        got = self.extend(N)
        if got < N:
            raise ValueError(f"sequence has only {got} terms, horizon {N} requested")
        if N < self.window:
            raise ValueError(f"horizon {N} is shorter than the window {self.window}")
        return N

    def averages(self, f: MetricTwist, N: int) -> np.ndarray:
        """Orbit averages ``a_n(f)`` for the first ``N`` terms."""
        self._check_horizon(N)
        if f.D > self.max_degree:
            for x, m in zip(self.points, self._moments):
                m.update(orbit_moments(x, f.D))
        return np.array([f.integrate_moments(m) for m in self._moments[:N]])

    def heights(self, N: int, twist: MetricTwist | None = None, power: int = 1) -> np.ndarray:
        """Heights of ``x_1..x_N`` for ``L^power`` twisted by ``twist``."""
        self._check_horizon(N)
        h = power * (np.array(self._base[:N]) + self.averages(self.metric.twist, N))
        if twist is not None and not twist.is_zero:
            h = h + self.averages(twist, N)
        return h

    def window_min(self, values: np.ndarray, N: int, shift: int = 0) -> float:
        hi = N - shift * self.window
        lo = hi - self.window
        if lo < 0:
            return math.nan
        return float(np.min(values[lo:hi]))


@dataclass
class PhiResult:
    value: float
    previous: float
    horizon: int
    window: int
    tol: float
    head: list

    @property
    def stabilized(self) -> bool:
        return math.isfinite(self.previous) and abs(self.value - self.previous) <= self.tol

    def to_json(self) -> dict:
        return {"value": self.value, "previous_window": self.previous, "horizon": self.horizon,
                "window": self.window, "tol": self.tol, "stabilized": self.stabilized}


def phi(est: PhiEstimator, horizon: int, twist: MetricTwist | None = None, power: int = 1,
        tol: float = DEFAULT_TOL) -> PhiResult:
    """Tail-window minimum of heights over indices ``N - W + 1 .. N``."""
    h = est.heights(horizon, twist, power)
    return PhiResult(est.window_min(h, horizon), est.window_min(h, horizon, 1), horizon, est.window,
                     tol, h.tolist())


def base_convergence(est: PhiEstimator, horizon: int, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Variation of the untwisted heights over the last window."""
    h = est.heights(horizon)[horizon - est.window:horizon]
    var = float(np.max(h) - np.min(h))
    return var <= tol, var


@dataclass
class DerivativeResult:
    twist: str
    per_m: dict
    value: float
    previous: float
    tol: float

    @property
    def stabilized(self) -> bool:
        vals = list(self.per_m.values())
        same_m = len(vals) < 2 or abs(vals[-1] - vals[-2]) <= self.tol
        return same_m and math.isfinite(self.previous) and abs(self.value - self.previous) <= self.tol

    def to_json(self) -> dict:
        return {"twist": self.twist, "per_m": {str(k): v for k, v in self.per_m.items()}, "value": self.value,
                "previous_window": self.previous, "stabilized": self.stabilized}

    def trend_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["m", "value"])
        for m, v in self.per_m.items():
            wr.writerow([m, repr(float(v))])
        return buf.getvalue()


def directional_derivative(est: PhiEstimator, f: MetricTwist, m_list: Sequence[int] = (1, 2, 4, 8),
                           horizon: int | None = None, tol: float = DEFAULT_TOL,
                           check: bool = True) -> DerivativeResult:
    """``phi(L^m (x) O(f)) - m phi(L)`` over ``m``; the last ``m`` is the estimate."""
    N = horizon or est.extend(10**9)
    if check:
        ok, var = base_convergence(est, N, tol)
        if not ok:
            raise HypothesisFailure(f"heights under L vary by {var:.3g} > tol over the last window; "
                                    "the derivative formula needs a convergent height sequence")
    h = est.heights(N)
    a = est.averages(f, N)
    per_m, prev = {}, math.nan
    for m in m_list:
        v = est.window_min(m * h + a, N) - m * est.window_min(h, N)
        per_m[int(m)] = v
        prev = est.window_min(m * h + a, N, 1) - m * est.window_min(h, N, 1)
    return DerivativeResult(f.label(), per_m, per_m[int(m_list[-1])], prev, tol)


class Verdict(str, Enum):
    EQUIDISTRIBUTES = "EQUIDISTRIBUTES"
    FAILS = "FAILS"
    INCONCLUSIVE = "INCONCLUSIVE"


def default_dictionary(max_degree: int = DEFAULT_DEGREE) -> list[MetricTwist]:
    return [MetricTwist.monomial(*idx) for idx in sphere_monomials(max_degree)]


@dataclass
class VerdictReport:
    verdict: Verdict
    per_pair: list
    horizon: int
    window: int
    tol: float
    max_gap: float
    derivatives: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"verdict": self.verdict.value, "per_pair": self.per_pair, "horizon": self.horizon,
                "window": self.window, "tol": self.tol, "max_gap": self.max_gap}


def additivity_verdict(est: PhiEstimator, dictionary: Sequence[MetricTwist] | None = None,
                       horizon: int | None = None, tol: float = DEFAULT_TOL, m: int = 1,
                       with_negatives: bool = True) -> VerdictReport:
    """Test ``D(f + g) = D(f) + D(g)`` on dictionary pairs.

    Pairs are all ``f < g`` in the dictionary plus ``(f, -f)`` for each ``f``
    (so that passing forces liminf and limsup of each orbit average to agree).
    EQUIDISTRIBUTES needs every pair within ``tol`` and every estimate
    stabilized.  FAILS needs a stabilized violation exceeding ``tol`` that also
    persists: the same pair's gap at horizon ``N // 2`` is not larger by more
    than ``tol`` (a decaying gap is slow convergence, not a counterexample).
    """
    N = horizon or est.extend(10**9)
    dic = list(default_dictionary(est.max_degree) if dictionary is None else dictionary)
    cache: dict = {}

    def D(f: MetricTwist) -> DerivativeResult:
        key = f.coeffs
        if key not in cache:
            cache[key] = directional_derivative(est, f, (m,), N, tol, check=False)
        return cache[key]

    ok, var = base_convergence(est, N, tol)
    if not ok:
        raise HypothesisFailure(f"heights under L vary by {var:.3g} > tol over the last window")
    raw = [(dic[i], dic[j]) for i in range(len(dic)) for j in range(i + 1, len(dic))]
    if with_negatives:
        raw += [(f, -f) for f in dic if not f.is_zero]
    pairs, seen = [], set()
    for f, g in raw:
        key = frozenset((f.coeffs, g.coeffs))
        if key not in seen:
            seen.add(key)
            pairs.append((f, g))
    half = N // 2

    def early_gap(f, g) -> float:
        if half < 2 * est.window:
            return math.nan
        d = [directional_derivative(est, t, (m,), half, tol, check=False).value for t in (f, g, f + g)]
        return abs(d[2] - d[0] - d[1])

    rows, max_gap = [], 0.0
    violated_stable, all_stable = False, True
    for f, g in pairs:
        df, dg, dfg = D(f), D(g), D(f + g)
        gap = abs(dfg.value - df.value - dg.value)
        prev_gap = abs(dfg.previous - df.previous - dg.previous)
        stable = df.stabilized and dg.stabilized and dfg.stabilized
        all_stable &= stable
        if gap > tol and stable and prev_gap > tol:
            eg = early_gap(f, g)
            if math.isfinite(eg) and eg <= gap + tol:
                violated_stable = True
        max_gap = max(max_gap, gap)
        rows.append({"f": f.label(), "g": g.label(), "D_f": df.value, "D_g": dg.value, "D_fg": dfg.value,
                     "gap": gap, "stabilized": stable})
    if violated_stable:
        verdict = Verdict.FAILS
    elif max_gap <= tol and all_stable:
        verdict = Verdict.EQUIDISTRIBUTES
    else:
        verdict = Verdict.INCONCLUSIVE
    return VerdictReport(verdict, rows, N, est.window, tol, max_gap,
                         {k: v.value for k, v in cache.items()})


def fourier_twists(k: int) -> tuple[MetricTwist, MetricTwist]:
    """Real and imaginary parts of ``(u1 + i u2)^k`` (equal to ``e^{ik theta}`` on the equator)."""
    re, im = {}, {}
    for j in range(k + 1):
        c = math.comb(k, j) * (1j) ** j
        if c.real:
            re[(k - j, j, 0)] = c.real
        if c.imag:
            im[(k - j, j, 0)] = c.imag
    return MetricTwist(re, k), MetricTwist(im, k)


@dataclass
class LimitMeasureReport:
    verdict: Verdict
    moments: dict
    density: CircleDensity | None
    w1_to_haar: float | None
    w1_last_orbit: float | None
    forced: bool

    def to_json(self) -> dict:
        out = {"verdict": self.verdict.value, "forced": self.forced,
               "moments": {k: v for k, v in sorted(self.moments.items())}}
        if self.density is not None:
            out["density"] = self.density.to_json()
            out["w1_to_haar_grid"] = self.w1_to_haar
            out["w1_last_orbit_to_candidate"] = self.w1_last_orbit
        return out


def limit_measure(est: PhiEstimator, dictionary: Sequence[MetricTwist] | None = None,
                  horizon: int | None = None, tol: float = DEFAULT_TOL, fourier_degree: int | None = None,
                  haar_points: int = 1000, force: bool = False,
                  verdict: VerdictReport | None = None) -> LimitMeasureReport:
    """Read the limit measure off the derivatives ``f -> D(f)``.

    Refuses unless the additivity verdict is EQUIDISTRIBUTES; ``force=True``
    produces the same report for diagnostics, flagged as forced.
    """
    N = horizon or est.extend(10**9)
    rep = verdict or additivity_verdict(est, dictionary, N, tol)
    if rep.verdict is not Verdict.EQUIDISTRIBUTES and not force:
        raise HypothesisFailure(f"limit measure needs an EQUIDISTRIBUTES verdict, got {rep.verdict.value}")
    dic = list(default_dictionary(est.max_degree) if dictionary is None else dictionary)
    moments = {f.label(): directional_derivative(est, f, (1,), N, tol, check=False).value for f in dic}
    tail = est.points[N - est.window:N]
    equator = all(
        not x.is_infinity and np.all(np.abs(np.abs(x.conjugates) - 1) <= 1e-9) for x in tail)
    density = w1_haar = w1_last = None
    if equator:
        D = fourier_degree or est.max_degree
        c = [1.0 + 0j]
        for k in range(1, D + 1):
            fr, fi = fourier_twists(k)
            cr = directional_derivative(est, fr, (1,), N, tol, check=False).value
            ci = directional_derivative(est, fi, (1,), N, tol, check=False).value
            c.append(complex(cr, ci))
            moments[f"c_{k}"] = [cr, ci]
        density = moments_to_circle_density(c)
        cand = density.as_measure()
        w1_haar = wasserstein_circle(cand, EmpiricalMeasure.haar_grid(haar_points))
        w1_last = wasserstein_circle(tail[-1].orbit_measure(), cand)
    return LimitMeasureReport(rep.verdict, moments, density, w1_haar, w1_last, force)
