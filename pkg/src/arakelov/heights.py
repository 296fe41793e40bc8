"""Adelic metrics on O(1) over P^1, archimedean twists, heights of algebraic points.

Finite places always carry the standard integral model, so all the
non-archimedean content of a height enters through the leading coefficient
of the minimal polynomial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Literal, Mapping

import numpy as np

from .measures import EmpiricalMeasure, sphere_coords
from .polyalg import (
    DEFAULT_TOL,
    IntegerPolynomial,
    RootSet,
    cached_roots,
    cyclotomic,
    irreducibility_status,
)

Base = Literal["canonical", "fubini-study"]
BASES = ("canonical", "fubini-study")


@dataclass(frozen=True)
class MetricTwist:
    """Polynomial ``f(u) = sum a_ijk u1^i u2^j u3^k`` in sphere coordinates.

    Twisting by ``f`` multiplies the metric by ``e^{-f}``.
    """

    coeffs: tuple = ()  # sorted ((i, j, k), a) pairs with a != 0
    D: int = 0

    def __init__(self, coeffs: Mapping | Iterable = (), D: int | None = None):
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict = {}
        for idx, a in items:
            idx = tuple(int(x) for x in idx)
            if len(idx) != 3 or min(idx) < 0:
                raise ValueError(f"bad multi-index {idx}")
            acc[idx] = acc.get(idx, 0.0) + float(a)
        clean = tuple(sorted((k, v) for k, v in acc.items() if v != 0.0))
        deg = max((sum(k) for k, _ in clean), default=0)
        if D is None:
            D = deg
        if deg > D:
            raise ValueError(f"twist has total degree {deg} > bound D={D}")
        object.__setattr__(self, "coeffs", clean)
        object.__setattr__(self, "D", int(D))

    @classmethod
    def zero(cls) -> "MetricTwist":
        return cls()

    @classmethod
    def constant(cls, c: float) -> "MetricTwist":
        return cls({(0, 0, 0): c})

    @classmethod
    def monomial(cls, i: int, j: int, k: int, a: float = 1.0) -> "MetricTwist":
        return cls({(i, j, k): a})

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def is_constant(self) -> bool:
        return all(idx == (0, 0, 0) for idx, _ in self.coeffs)

    @property
    def constant_term(self) -> float:
        return dict(self.coeffs).get((0, 0, 0), 0.0)

    @property
    def is_radial(self) -> bool:
        """Depends on u3 only, i.e. invariant under rotations z -> e^{it} z."""
        return all(i == 0 and j == 0 for (i, j, _), _a in self.coeffs)

    def __add__(self, other: "MetricTwist") -> "MetricTwist":
        return MetricTwist(list(self.coeffs) + list(other.coeffs), max(self.D, other.D))

    def __neg__(self) -> "MetricTwist":
        return MetricTwist([(k, -a) for k, a in self.coeffs], self.D)

    def __sub__(self, other: "MetricTwist") -> "MetricTwist":
        return self + (-other)

    def scale(self, s: float) -> "MetricTwist":
        return MetricTwist([(k, s * a) for k, a in self.coeffs], self.D)

    def __call__(self, u1, u2, u3) -> np.ndarray:
        u1, u2, u3 = (np.asarray(x, dtype=float) for x in (u1, u2, u3))
        out = np.zeros(np.broadcast(u1, u2, u3).shape)
        for (i, j, k), a in self.coeffs:
            out = out + a * u1**i * u2**j * u3**k
        return out

    def at(self, z) -> np.ndarray:
        return self(*sphere_coords(z))

    @property
    def lipschitz(self) -> float:
        """Bound on ``|f(u) - f(u')| / |u - u'|`` over the unit ball."""
        return float(sum(abs(a) * (i + j + k) for (i, j, k), a in self.coeffs))

    @property
    def hessian_bound(self) -> float:
        """Bound on the Hessian operator norm over the unit cube."""
        return float(sum(abs(a) * (i + j + k) * (i + j + k - 1) for (i, j, k), a in self.coeffs))

    def gradient(self, u1, u2, u3) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        u1, u2, u3 = (np.asarray(x, dtype=float) for x in (u1, u2, u3))
        g = [np.zeros(np.broadcast(u1, u2, u3).shape) for _ in range(3)]
        for (i, j, k), a in self.coeffs:
            if i:
                g[0] = g[0] + a * i * u1 ** (i - 1) * u2**j * u3**k
            if j:
                g[1] = g[1] + a * j * u1**i * u2 ** (j - 1) * u3**k
            if k:
                g[2] = g[2] + a * k * u1**i * u2**j * u3 ** (k - 1)
        return g[0], g[1], g[2]

    def bounds(self) -> tuple[float, float]:
        """Crude enclosure of f on the sphere (|u_l| <= 1)."""
        c = self.constant_term
        rest = sum(abs(a) for idx, a in self.coeffs if idx != (0, 0, 0))
        return c - rest, c + rest

    def integrate_moments(self, moments: Mapping) -> float:
        """``int f d eta`` given the measure's monomial integrals ``{(i,j,k): value}``."""
        return float(sum(a * moments[idx] for idx, a in self.coeffs))

    def label(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for (i, j, k), a in self.coeffs:
            mono = "*".join(f"u{n}" + (f"^{e}" if e > 1 else "") for n, e in ((1, i), (2, j), (3, k)) if e)
            parts.append(f"{a:g}" + ("*" + mono if mono else ""))
        return " + ".join(parts)

    def to_json(self) -> dict:
        return {"D": self.D, "coeffs": [{"i": i, "j": j, "k": k, "a": a} for (i, j, k), a in self.coeffs]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "MetricTwist":
        return cls([((c["i"], c["j"], c["k"]), c["a"]) for c in obj.get("coeffs", [])], obj.get("D"))


def sphere_monomials(max_degree: int, min_degree: int = 1) -> list[tuple[int, int, int]]:
    return [
        (i, j, k)
        for d in range(min_degree, max_degree + 1)
        for i in range(d, -1, -1)
        for j in range(d - i, -1, -1)
        for k in [d - i - j]
    ]


@dataclass(frozen=True)
class AdelicMetric:
    base: Base = "canonical"
    twist: MetricTwist = field(default_factory=MetricTwist)

    def __post_init__(self):
        if self.base not in BASES:
            raise ValueError(f"unknown metric base {self.base!r}; expected one of {BASES}")

    @property
    def is_radial(self) -> bool:
        return self.twist.is_radial

    def twisted(self, f: MetricTwist) -> "AdelicMetric":
        return AdelicMetric(self.base, self.twist + f)

    def to_json(self) -> dict:
        return {"base": self.base, "twist": self.twist.to_json()}

    @classmethod
    def from_json(cls, obj: Mapping) -> "AdelicMetric":
        return cls(obj["base"], MetricTwist.from_json(obj.get("twist", {})))


@dataclass(frozen=True, eq=False)
class AlgebraicPoint:
    """A closed point of P^1 over Q: a minimal polynomial, or ``None`` for infinity."""

    minimal_polynomial: IntegerPolynomial | None
    irreducibility: str = "verified"
    tol: float = DEFAULT_TOL
    label: str = ""

    @classmethod
    def from_polynomial(cls, p: IntegerPolynomial, tol: float = DEFAULT_TOL, *,
                        status: str | None = None, label: str = "") -> "AlgebraicPoint":
        if p.degree < 1:
            raise ValueError("a point needs a polynomial of degree >= 1")
        q = p.primitive()
        st = status or irreducibility_status(q)
        if st == "reducible":
            raise ValueError(f"{q} is reducible over Q")
        return cls(q, st, tol, label or str(q))

    @classmethod
    def rational(cls, value, tol: float = DEFAULT_TOL) -> "AlgebraicPoint":
        v = Fraction(value)
        return cls(IntegerPolynomial.linear(v), "verified", tol, str(v))

    @classmethod
    def infinity(cls) -> "AlgebraicPoint":
        return cls(None, "verified", DEFAULT_TOL, "inf")

    @classmethod
    def cyclotomic(cls, n: int, tol: float = DEFAULT_TOL) -> "AlgebraicPoint":
        return cls(cyclotomic(n), "verified", tol, f"Phi_{n}")

    @property
    def is_infinity(self) -> bool:
        return self.minimal_polynomial is None

    @property
    def degree(self) -> int:
        return 1 if self.is_infinity else self.minimal_polynomial.degree

    @cached_property
    def root_set(self) -> RootSet | None:
        if self.is_infinity:
            return None
        return cached_roots(self.minimal_polynomial, self.tol)

    @property
    def conjugates(self) -> np.ndarray:
        if self.is_infinity:
            return np.array([complex("inf")])
        return self.root_set.roots

    def orbit_measure(self) -> EmpiricalMeasure:
        return orbit_measure(self)

    @cached_property
    def base_heights(self) -> dict:
        return {b: _base_height(self, b) for b in BASES}

    def moments(self, max_degree: int) -> dict:
        return orbit_moments(self, max_degree)

    def __repr__(self) -> str:
        return f"AlgebraicPoint({self.label})"


def orbit_measure(x: AlgebraicPoint) -> EmpiricalMeasure:
    """Equal-weight measure on the complex conjugates of ``x``."""
    return EmpiricalMeasure.uniform(x.conjugates)


def _base_height(x: AlgebraicPoint, base: str) -> float:
    if x.is_infinity:
        return 0.0
    p = x.minimal_polynomial
    z = x.root_set.roots
    lead = math.log(abs(p.leading))
    if base == "canonical":
        with np.errstate(divide="ignore"):
            s = float(np.sum(np.maximum(0.0, np.log(np.abs(z)))))
    else:
        s = float(np.sum(0.5 * np.log1p(np.abs(z) ** 2)))
    return (lead + s) / p.degree


def orbit_moments(x: AlgebraicPoint, max_degree: int) -> dict:
    """Integrals of sphere monomials of degree <= max_degree against the orbit measure."""
    cached = x.__dict__.get("_moments")
    if cached is not None and cached[0] >= max_degree:
        return cached[1]
    u1, u2, u3 = sphere_coords(x.conjugates)
    out = {(0, 0, 0): 1.0}
    for idx in sphere_monomials(max_degree):
        i, j, k = idx
        out[idx] = float(np.mean(u1**i * u2**j * u3**k))
    x.__dict__["_moments"] = (max_degree, out)
    return out


def height(x: AlgebraicPoint, M: AdelicMetric) -> float:
    """Normalized height of ``x``: base part plus the orbit average of the twist."""
    h = x.base_heights[M.base]
    if not M.twist.is_zero:
        h += float(np.mean(M.twist.at(x.conjugates)))
    return h


def height_error_bound(x: AlgebraicPoint, M: AdelicMetric) -> float:
    """A posteriori bound on ``|height(x, M) - h_M(x)|`` from the certified root radii.

    ``log max(1, |z|)`` is 1-Lipschitz and ``log sqrt(1 + |z|^2)`` is 1/2-Lipschitz in
    ``z``; the chordal distance is at most twice the planar one.
    """
    if x.is_infinity:
        return 0.0
    r = float(x.root_set.max_radius)
    base = r if M.base == "canonical" else 0.5 * r
    return base + 2 * M.twist.lipschitz * r + 4 * np.finfo(float).eps * (1 + abs(height(x, M)))


@dataclass
class AdditivityReport:
    point: str
    base_height: float
    samples: list
    max_error: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_error <= self.tol

    def to_json(self) -> dict:
        return {"point": self.point, "base_height": self.base_height, "max_error": self.max_error,
                "tol": self.tol, "ok": self.ok, "samples": self.samples}


def random_twist(rng: np.random.Generator, degree: int = 2, scale: float = 1.0) -> MetricTwist:
    idx = [(0, 0, 0)] + sphere_monomials(degree)
    return MetricTwist({m: scale * rng.standard_normal() for m in idx}, degree)


def height_additivity_check(x: AlgebraicPoint, M1: AdelicMetric, g: MetricTwist,
                            extra: Iterable[MetricTwist] = (), tol: float = 1e-10) -> AdditivityReport:
    """Compare ``h(M1 + g)`` with ``h(M1) + int g d eta_x`` along two code paths.

    The direct path integrates ``g`` pointwise over the conjugates; the second
    path uses cached monomial moments of the orbit.
    """
    h1 = height(x, M1)
    samples = []
    err = 0.0
    for f in [g, *extra]:
        lhs = height(x, M1.twisted(f))
        mom = orbit_moments(x, max(f.D, 1))
        rhs = h1 + f.integrate_moments(mom)
        samples.append({"twist": f.label(), "twisted": lhs, "predicted": rhs})
        err = max(err, abs(lhs - rhs))
    return AdditivityReport(x.label, h1, samples, err, tol)
