"""Successive minima of the section lattices E_n and the asymptotic measure.

For rotation-invariant metrics (twists in ``u3`` only) the minima are the
sorted sup norms of the monomials: Cauchy's estimate on each circle gives
``||s|| >= |a_k| ||z^k||`` for every coefficient, and ``i`` independent
integer sections have at least ``i`` distinct monomials in their supports.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapExceeded, MeasureError
from .heights import AdelicMetric
from .lattices import AdelicLattice, Estimate, chi
from .measures import StepMeasure, step_moment, wasserstein_line
from .reduction import fincke_pohst, greedy_minima, is_primitive, lll, minima_lower_bounds
from .sections import SectionSpace, _homog, _sphere_point

EXACT_CAP = 6
REDUCTION_CAP = 24
COUNT_CAP = 8
METHODS = ("auto", "radial", "exact", "reduction")


@dataclass(frozen=True)
class MinimaFiltration:
    """Brackets ``lower[i] <= lambda_{i+1} <= upper[i]``, sorted increasingly."""

    n: int
    lower: tuple
    upper: tuple
    exact: tuple
    method: str

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        object.__setattr__(self, "exact", tuple(bool(v) for v in self.exact))

    @property
    def rank(self) -> int:
        return len(self.lower)

    @property
    def values(self) -> np.ndarray:
        lo, up = np.array(self.lower), np.array(self.upper)
        return np.where(np.array(self.exact), lo, np.sqrt(lo * up))

    def _t(self, lam) -> np.ndarray:
        if self.n == 0:
            raise MeasureError("the filtration at n = 0 has no normalized levels")
        return -np.log(np.asarray(lam, dtype=float)) / self.n

    @property
    def t(self) -> np.ndarray:
        return self._t(self.values)

    @property
    def t_lower(self) -> np.ndarray:
        return self._t(self.upper)

    @property
    def t_upper(self) -> np.ndarray:
        return self._t(self.lower)

    def to_rows(self) -> list[list]:
        return [[self.n, i + 1, lo, up, ex] for i, (lo, up, ex) in
                enumerate(zip(self.lower, self.upper, self.exact))]

    def to_json(self) -> dict:
        return {"n": self.n, "method": self.method,
                "minima": [{"i": i + 1, "lower": lo, "upper": up, "exact": ex}
                           for i, (lo, up, ex) in enumerate(zip(self.lower, self.upper, self.exact))]}


def _pick(method: str, space: SectionSpace, exact_cap: int) -> str:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method != "auto":
        return method
    if space.is_radial:
        return "radial"
    return "exact" if space.n <= exact_cap else "reduction"


def successive_minima(space: SectionSpace, method: str = "auto", exact_cap: int = EXACT_CAP,
                      reduction_cap: int = REDUCTION_CAP, enum_limit: int = 200_000) -> MinimaFiltration:
    method = _pick(method, space, exact_cap)
    n = space.n
    if method == "radial":
        if not space.is_radial:
            raise ValueError("radial path needs a rotation-invariant metric")
        b = [space.monomial_norm(k) for k in range(space.rank)]
        b.sort(key=lambda x: (x.lower, x.upper))
        lo = sorted(x.lower for x in b)
        up = sorted(x.upper for x in b)
        return MinimaFiltration(n, tuple(lo), tuple(up), tuple(a == c for a, c in zip(lo, up)), "radial")
    if method == "exact":
        if n > exact_cap:
            raise CapExceeded(f"exact enumeration is capped at n <= {exact_cap}, got n = {n}")
        return _exact_minima(space, enum_limit)
    if n > reduction_cap:
        raise CapExceeded(f"reduction path is capped at n <= {reduction_cap}, got n = {n}")
    return _reduction_minima(space)


def _monomial_bounds(space: SectionSpace):
    return [space.monomial_norm(k) for k in range(space.rank)]


def _exact_minima(space: SectionSpace, enum_limit: int) -> MinimaFiltration:
    mono = _monomial_bounds(space)
    R = max(b.upper for b in mono)
    Q = space.lower_gram()
    cands = [x for x in fincke_pohst(Q, R, enum_limit) if is_primitive(x)]
    if cands:
        # grid maxima are lower bounds for the sup: discard hopeless vectors before certifying
        grid = _BatchSup(space).batch(np.array(cands, dtype=float))
        cands = [x for x, g in zip(cands, grid) if g <= R * (1 + 1e-12)]
    bounds = [space.sup_norm(x) for x in cands]
    keep = [i for i, b in enumerate(bounds) if b.lower <= R]
    cands = [cands[i] for i in keep]
    bounds = [bounds[i] for i in keep]
    lo = greedy_minima(cands, [b.lower for b in bounds], space.rank)
    up = greedy_minima(cands, [b.upper for b in bounds], space.rank)
    if len(lo) < space.rank or len(up) < space.rank:
        raise CapExceeded("enumeration did not produce a spanning family")
    return MinimaFiltration(space.n, tuple(lo), tuple(up), tuple(a == c for a, c in zip(lo, up)), "exact")


def _reduction_minima(space: SectionSpace) -> MinimaFiltration:
    Q = space.lower_gram()
    B = lll(Q)
    low = minima_lower_bounds(B, Q)
    cands = [tuple(int(v) for v in row) for row in B]
    cands += [tuple(int(j == k) for j in range(space.rank)) for k in range(space.rank)]
    ups = [space.sup_norm(x).upper for x in cands]
    up = greedy_minima(cands, ups, space.rank)
    lo = [min(a, b) for a, b in zip(low, up)]
    return MinimaFiltration(space.n, tuple(float(v) for v in lo), tuple(up),
                            tuple(a == c for a, c in zip(lo, up)), "reduction")


def filtration_measure(F: MinimaFiltration, tie_tol: float = 1e-12) -> StepMeasure:
    """Mass ``1/(n+1)`` at each ``t_i = -log(lambda_i)/n``, ties merged."""
    return StepMeasure.from_values(F.t, tie_tol=tie_tol)


@dataclass
class AsymptoticReport:
    metric: AdelicMetric
    n_list: list
    filtrations: list
    measures: list
    gaps: list
    trend: list  # rows (n, mean, pos-mean, sup-support) with bounds

    @property
    def estimate(self) -> StepMeasure:
        return self.measures[-1]

    def moment(self, kind: str) -> float:
        return step_moment(self.estimate, kind)

    @property
    def mean_monotone(self) -> bool:
        m = [r["mean"] for r in self.trend]
        return all(b >= a for a, b in zip(m, m[1:])) or all(b <= a for a, b in zip(m, m[1:]))

    @property
    def gaps_decreasing(self) -> bool:
        return all(b <= a + 1e-12 for a, b in zip(self.gaps, self.gaps[1:]))

    def to_json(self) -> dict:
        return {
            "metric": self.metric.to_json(),
            "n_list": self.n_list,
            "trend": self.trend,
            "transport_gaps": self.gaps,
            "gaps_decreasing": self.gaps_decreasing,
            "mean_monotone": self.mean_monotone,
            "estimate": self.estimate.to_json(),
            "mu_max_pi": self.trend[-1]["sup_support"],
            "mu_pi": self.trend[-1]["mean"],
            "mu_plus_pi": self.trend[-1]["positive_part_mean"],
        }

    def trend_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        cols = ["n", "mean", "mean_lower", "mean_upper", "positive_part_mean", "sup_support",
                "sup_support_lower", "sup_support_upper", "exact"]
        wr.writerow(cols)
        for r in self.trend:
            wr.writerow([_fmt(r[c]) for c in cols])
        return buf.getvalue()

    def minima_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n", "i", "lower", "upper", "exact"])
        for F in self.filtrations:
            for row in F.to_rows():
                wr.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def measures_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n", "t", "mass"])
        for n, m in zip(self.n_list, self.measures):
            for t, w in zip(m.breakpoints, m.masses):
                wr.writerow([n, repr(float(t)), repr(float(w))])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def trend_row(F: MinimaFiltration) -> dict:
    m = filtration_measure(F)
    tl, tu = F.t_lower, F.t_upper
    return {
        "n": F.n,
        "mean": step_moment(m, "mean"),
        "mean_lower": float(np.mean(tl)),
        "mean_upper": float(np.mean(tu)),
        "positive_part_mean": step_moment(m, "positive-part-mean"),
        "sup_support": step_moment(m, "sup-support"),
        "sup_support_lower": float(np.max(tl)),
        "sup_support_upper": float(np.max(tu)),
        "exact": all(F.exact),
    }


def asymptotic_measure(metric: AdelicMetric, n_list: Sequence[int], method: str = "auto",
                       threads: int = 1) -> AsymptoticReport:
    ns = [int(n) for n in n_list]
    if not ns or any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_list must be a non-empty increasing list of positive integers")

    def run(n: int) -> MinimaFiltration:
        return successive_minima(SectionSpace(n, metric), method=method)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            Fs = list(pool.map(run, ns))
    else:
        Fs = [run(n) for n in ns]
    ms = [filtration_measure(F) for F in Fs]
    gaps = [wasserstein_line(a, b) for a, b in zip(ms, ms[1:])]
    return AsymptoticReport(metric, ns, Fs, ms, gaps, [trend_row(F) for F in Fs])


def effective_sections(space: SectionSpace, cap: int = COUNT_CAP, limit: int = 2_000_000,
                       refine: float = 1e-12) -> list[tuple[int, ...]]:
    """All nonzero integer sections with sup norm <= 1 (both signs)."""
    if space.n > cap:
        raise CapExceeded(f"section counting is capped at n <= {cap}, got n = {space.n}")
    Q = space.lower_gram()
    out = []
    for x in fincke_pohst(Q, 1.0, limit):
        b = space.sup_norm(x)
        if b.lower > 1.0:
            continue
        if b.upper > 1.0 and not b.exact:
            fine = SectionSpace(space.n, space.metric, rtol=refine, budget=space.budget * 4).sup_norm(x)
            if fine.lower <= 1.0 < fine.upper:
                from .errors import CertificationError
                raise CertificationError(f"cannot decide ||{x}|| <= 1 (bracket [{fine.lower}, {fine.upper}])")
            if fine.upper > 1.0:
                continue
        out.append(x)
        out.append(tuple(-v for v in x))
    return sorted(out)


def count_effective_sections(space: SectionSpace, cap: int = COUNT_CAP) -> float:
    """``log #{s integer : ||s||_sup <= 1}``, the zero section included."""
    return math.log(1 + len(effective_sections(space, cap)))


class _BatchSup:
    """Grid evaluation of the sup norm for many coefficient vectors at once."""

    def __init__(self, space: SectionSpace, density: int = 8):
        n = space.n
        self.n = n
        if space.circle_mode:
            N = density * 4 * (n + 1)
            th = 2 * np.pi * np.arange(N) / N
            self.V = np.exp(1j * np.outer(th, np.arange(n + 1)))
            self.w = np.full(N, space.twist_factor)
        else:
            n_lat, n_lon = density * (n + 2), 2 * density * (n + 2)
            phi = np.pi * (np.arange(n_lat) + 0.5) / n_lat
            phi = np.concatenate([[0.0, np.pi], phi])
            theta = 2 * np.pi * np.arange(n_lon) / n_lon
            P, T = np.meshgrid(phi, theta, indexing="ij")
            P, T = P.ravel(), T.ravel()
            x0, x1 = _homog(P, T, space.metric.base)
            k = np.arange(n + 1)
            self.V = x1[:, None] ** k * x0[:, None] ** (n - k)
            self.w = np.exp(-n * space.metric.twist(*_sphere_point(P, T)))

    def __call__(self, x):
        return self.batch(np.atleast_2d(x))[0]

    def batch(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X))
        step = max(1, 2_000_000 // len(self.V))
        for i in range(0, len(X), step):
            vals = np.abs(X[i:i + step] @ self.V.T) * self.w
            out[i:i + step] = vals.max(axis=1)
        return out


@dataclass
class CapacityReport:
    rows: list
    mu_pi: Estimate
    slope_fit: float
    sectional_capacity: Estimate
    minima_mean: float | None

    def to_json(self) -> dict:
        return {"rows": self.rows, "mu_pi": self.mu_pi.to_json(), "fit_slope_in_1_over_n": self.slope_fit,
                "sectional_capacity": self.sectional_capacity.to_json(), "minima_mean": self.minima_mean}


def sectional_capacity_estimate(metric: AdelicMetric, n_list: Sequence[int], samples: int = 20000,
                                seed: int = 0) -> CapacityReport:
    """Monte Carlo ``deg(E_n)``, normalized as ``deg/(n(n+1))`` and extrapolated in ``1/n``.

    Each row also carries the Minkowski bracket
    ``[-sum log lambda_i - log (n+1)!, -sum log lambda_i]`` from the minima.
    For ``O(1)`` on ``P^1``, ``mu^pi = S/2`` with ``S = lim 2 deg(E_n)/n^2``.
    """
    rows = []
    for j, n in enumerate(int(v) for v in n_list):
        space = SectionSpace(n, metric)
        if space.rank > 10:
            raise CapExceeded("Monte Carlo volumes need n + 1 <= 10")
        oracle = _BatchSup(space)
        E = AdelicLattice(space.rank, "oracle", oracle=oracle, lower_gram=space.lower_gram(), label=f"E_{n}")
        d = chi(E, samples, seed + j)
        F = successive_minima(space)
        s_lo = float(-np.sum(np.log(F.upper)))
        s_up = float(-np.sum(np.log(F.lower)))
        rows.append({"n": n, "deg": d.value, "deg_std_error": d.std_error,
                     "minkowski_lower": s_lo - math.lgamma(n + 2), "minkowski_upper": s_up,
                     "mu_n": d.value / (n * (n + 1)), "mu_n_std_error": d.std_error / (n * (n + 1)),
                     "S_n": 2 * d.value / n**2})
    ns = np.array([r["n"] for r in rows], dtype=float)
    y = np.array([r["mu_n"] for r in rows])
    se = np.array([max(r["mu_n_std_error"], 1e-12) for r in rows])
    fits = [_wls([np.ones_like(ns)] + cols, y, se) for cols in ([1 / ns], [np.log(ns) / ns, 1 / ns])
            if len(ns) >= len(cols) + 1]
    if fits:
        # the log-term model is preferred; model disagreement enters the error bar
        (mu, stat, slope_fit), first = fits[-1], fits[0]
        err = math.hypot(stat, abs(mu - first[0]))
    else:
        mu, err, slope_fit = float(y[0]), float(se[0]), 0.0
    est = Estimate(mu, err, False, samples, seed)
    last = successive_minima(SectionSpace(rows[-1]["n"], metric))
    return CapacityReport(rows, est, slope_fit, est.scale(2.0), trend_row(last)["mean"])


def _wls(cols, y, se) -> tuple[float, float, float]:
    A = np.vstack(cols).T
    W = 1 / se**2
    cov = np.linalg.inv(A.T @ (W[:, None] * A))
    coef = cov @ A.T @ (W * y)
    return float(coef[0]), float(math.sqrt(cov[0, 0])), float(coef[-1])


def known_essential_minimum(metric: AdelicMetric) -> float | None:
    """Closed forms for the metrics where the essential minimum is known."""
    tw = metric.twist
    if not tw.is_constant:
        return None
    base = 0.0 if metric.base == "canonical" else 0.5 * math.log(2)
    return base + tw.constant_term


@dataclass
class ChainReport:
    mean: float
    positive_part_mean: float
    sup_support: float
    sup_support_bounds: tuple
    mu_ess: float | None
    big: bool
    measure_chain: bool
    ess_comparison: str
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"mean": self.mean, "positive_part_mean": self.positive_part_mean,
                "sup_support": self.sup_support, "sup_support_bounds": list(self.sup_support_bounds),
                "mu_ess": self.mu_ess, "arithmetically_big": self.big,
                "measure_chain": self.measure_chain, "ess_comparison": self.ess_comparison,
                "violations": self.violations, "ok": self.ok}


def step_chain_holds(m: StepMeasure, slack: float = 0.0) -> tuple[bool, bool]:
    """``(sup >= pos_mean, pos_mean >= mean)`` on step data."""
    sup = step_moment(m, "sup-support")
    pos = step_moment(m, "positive-part-mean")
    mean = step_moment(m, "mean")
    return sup >= pos - slack, pos >= mean - slack


def inequality_chain_check(metric: AdelicMetric, n_list: Sequence[int] = (4, 8, 12, 16, 20, 24),
                           report: AsymptoticReport | None = None, slack: float = 1e-12) -> ChainReport:
    """Check ``mu_ess >= mu_max^pi >= mu^pi`` and, when ``mu_max^pi > 0``, ``mu_max^pi >= mu_+^pi >= mu^pi``.

    The measure-level chain is checked on every step measure in the run;
    ``sup >= pos-mean`` is only asserted when the sup is positive, since a
    measure supported on negative reals has ``pos-mean = 0 > sup``.
    """
    rep = report or asymptotic_measure(metric, n_list)
    viol = []
    for n, m in zip(rep.n_list, rep.measures):
        sup = step_moment(m, "sup-support")
        pos = step_moment(m, "positive-part-mean")
        mean = step_moment(m, "mean")
        if sup < mean - slack:
            viol.append({"n": n, "failed": "sup-support >= mean"})
        if pos < mean - slack:
            viol.append({"n": n, "failed": "positive-part mean >= mean"})
        if sup > 0 and sup < pos - slack:
            viol.append({"n": n, "failed": "sup-support >= positive-part mean"})
    last = rep.trend[-1]
    big = last["sup_support"] > 0
    mu_ess = known_essential_minimum(metric)
    if mu_ess is None:
        ess = "unknown"
    elif mu_ess >= last["sup_support_upper"] - slack:
        ess = "holds"
    elif mu_ess < last["sup_support_lower"] - slack:
        ess = "violated"
        viol.append({"n": last["n"], "failed": "mu_ess >= sup-support"})
    else:
        ess = "inconclusive"
    return ChainReport(last["mean"], last["positive_part_mean"], last["sup_support"],
                       (last["sup_support_lower"], last["sup_support_upper"]), mu_ess, big,
                       not viol, ess, viol)
