"""Integer polynomials, certified complex roots, Mahler measure, point sequences.

Polynomials are stored constant-term first, so ``IntegerPolynomial((-2, 1))``
is ``x - 2``.
"""

from __future__ import annotations

import hashlib
import math
import os
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, reduce
from typing import Iterator, Mapping, Sequence

import mpmath
import numpy as np
import sympy

from .errors import RootFindingError

CACHE_ENV = "ARAKELOV_CACHE_DIR"
FACTOR_DEGREE = 40

DEFAULT_TOL = 1e-12
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class IntegerPolynomial:
    coefficients: tuple[int, ...]

    def __init__(self, coefficients: Sequence[int]):
        coeffs = [int(c) for c in coefficients]
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        if not coeffs:
            coeffs = [0]
        object.__setattr__(self, "coefficients", tuple(coeffs))

    @classmethod
    def linear(cls, value) -> "IntegerPolynomial":
        """Minimal polynomial ``q*x - p`` of the rational ``p/q``."""
        q = Fraction(value)
        return cls((-q.numerator, q.denominator))

    @classmethod
    def monomial(cls, k: int, c: int = 1) -> "IntegerPolynomial":
        return cls([0] * k + [c])

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_zero(self) -> bool:
        return self.coefficients == (0,)

    @property
    def leading(self) -> int:
        return self.coefficients[-1]

    @property
    def content(self) -> int:
        return reduce(math.gcd, self.coefficients, 0)

    def primitive(self) -> "IntegerPolynomial":
        c = self.content
        if c == 0:
            return self
        sign = -1 if self.leading < 0 else 1
        return IntegerPolynomial([sign * (a // c) for a in self.coefficients])

    def __add__(self, other: "IntegerPolynomial") -> "IntegerPolynomial":
        n = max(len(self.coefficients), len(other.coefficients))
        a = self.coefficients + (0,) * (n - len(self.coefficients))
        b = other.coefficients + (0,) * (n - len(other.coefficients))
        return IntegerPolynomial([x + y for x, y in zip(a, b)])

    def __neg__(self) -> "IntegerPolynomial":
        return IntegerPolynomial([-a for a in self.coefficients])

    def __sub__(self, other: "IntegerPolynomial") -> "IntegerPolynomial":
        return self + (-other)

    def __mul__(self, other: "IntegerPolynomial") -> "IntegerPolynomial":
        if self.is_zero or other.is_zero:
            return IntegerPolynomial([0])
        out = [0] * (self.degree + other.degree + 1)
        for i, a in enumerate(self.coefficients):
            if a:
                for j, b in enumerate(other.coefficients):
                    out[i + j] += a * b
        return IntegerPolynomial(out)

    def divmod_monic(self, divisor: "IntegerPolynomial") -> tuple["IntegerPolynomial", "IntegerPolynomial"]:
        """Long division by a polynomial with leading coefficient +-1."""
        if divisor.leading not in (1, -1):
            raise ValueError("divisor must have leading coefficient +-1")
        rem = list(self.coefficients)
        dd = divisor.degree
        if self.degree < dd:
            return IntegerPolynomial([0]), self
        quot = [0] * (self.degree - dd + 1)
        for i in range(self.degree - dd, -1, -1):
            c = rem[i + dd] * divisor.leading
            quot[i] = c
            if c:
                for j, b in enumerate(divisor.coefficients):
                    rem[i + j] -= c * b
        return IntegerPolynomial(quot), IntegerPolynomial(rem[:dd] or [0])

    def derivative(self) -> "IntegerPolynomial":
        return IntegerPolynomial([i * a for i, a in enumerate(self.coefficients)][1:] or [0])

    def reversed(self) -> "IntegerPolynomial":
        """Reciprocal polynomial ``x^d p(1/x)`` (degree drops if p(0) = 0)."""
        return IntegerPolynomial(list(reversed(self.coefficients)))

    def __call__(self, x):
        acc = 0 * x
        for a in reversed(self.coefficients):
            acc = acc * x + a
        return acc

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        """Horner evaluation in floating point, vectorized over ``z``."""
        z = np.asarray(z, dtype=complex)
        acc = np.zeros_like(z)
        for a in reversed(self.coefficients):
            acc = acc * z + float(a)
        return acc

    def __str__(self) -> str:
        terms = []
        for k in range(self.degree, -1, -1):
            a = self.coefficients[k]
            if a == 0 and self.degree > 0:
                continue
            mono = "" if k == 0 else ("x" if k == 1 else f"x^{k}")
            if mono and abs(a) == 1:
                coef = "-" if a < 0 else ""
            else:
                coef = str(a)
            terms.append(coef + ("*" if mono and abs(a) != 1 else "") + mono)
        return " + ".join(terms).replace("+ -", "- ")

    def to_json(self) -> list[int]:
        return list(self.coefficients)


@dataclass(frozen=True)
class RootSet:
    roots: np.ndarray
    radius_bounds: np.ndarray
    degree: int
    digits: int = 15

    def __len__(self) -> int:
        return len(self.roots)

    @property
    def max_radius(self) -> float:
        return float(self.radius_bounds.max()) if len(self.radius_bounds) else 0.0


def _conjugate_close(z: np.ndarray, slack: np.ndarray) -> np.ndarray:
    """Snap nearly real roots to the axis and pair up complex roots exactly."""
    real = np.abs(z.imag) <= slack
    upper = z[(~real) & (z.imag > 0)]
    lower = z[(~real) & (z.imag < 0)]
    if len(upper) != len(lower):
        return z
    upper = upper[np.argsort(upper.real)]
    lower = lower[np.argsort(lower.real)]
    if len(upper) and np.max(np.abs(upper - np.conj(lower))) > 1e-6 * (1 + np.abs(upper).max()):
        return z
    mid = 0.5 * (upper + np.conj(lower))
    out = np.concatenate([z[real].real.astype(complex), mid, np.conj(mid)])
    return out


_LD = np.longdouble
_LD_EPS = float(np.finfo(_LD).eps)


def _horner_ld(coeffs: Sequence[int], z: np.ndarray) -> np.ndarray:
    zl = z.astype(np.clongdouble)
    acc = np.zeros_like(zl)
    for a in reversed(coeffs):
        acc = acc * zl + _LD(a)
    return acc


def _radii_float(p: IntegerPolynomial, z: np.ndarray) -> np.ndarray:
    """Inclusion radii ``d*|p/p'|`` with a running rounding-error term."""
    d = p.degree
    val = _horner_ld(p.coefficients, z)
    dval = _horner_ld(p.derivative().coefficients, z)
    absz = np.abs(z).astype(_LD)
    bound = np.zeros_like(absz)
    for a in reversed(p.coefficients):
        bound = bound * absz + _LD(abs(a))
    err = 2.0 * (d + 1) * _LD_EPS * bound
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = (d * (np.abs(val) + err) / np.abs(dval)).astype(float)
    r[~np.isfinite(r)] = np.inf
    return r


def _newton_float(p: IntegerPolynomial, z: np.ndarray, steps: int = 4) -> np.ndarray:
    dcoeffs = p.derivative().coefficients
    zl = z.astype(np.clongdouble)
    for _ in range(steps):
        val = _horner_ld(p.coefficients, zl)
        dval = _horner_ld(dcoeffs, zl)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            step = val / dval
        ok = np.isfinite(step)
        cand = np.where(ok, zl - step, zl)
        better = np.abs(_horner_ld(p.coefficients, cand)) <= np.abs(val)
        zl = np.where(better, cand, zl)
    return zl.astype(complex)


def _mp_refine(p: IntegerPolynomial, z: np.ndarray, dps: int, max_iter: int):
    with mpmath.workdps(dps):
        coeffs = [mpmath.mpf(a) for a in reversed(p.coefficients)]
        dcoeffs = [mpmath.mpf(a) for a in reversed(p.derivative().coefficients)]
        out = []
        radii = []
        residual = 0.0
        for z0 in z:
            w = mpmath.mpc(z0)
            for _ in range(max_iter):
                v = mpmath.polyval(coeffs, w)
                dv = mpmath.polyval(dcoeffs, w)
                if dv == 0:
                    break
                step = v / dv
                w -= step
                if abs(step) < mpmath.mpf(10) ** (-dps + 5) * (1 + abs(w)):
                    break
            v = mpmath.polyval(coeffs, w)
            dv = mpmath.polyval(dcoeffs, w)
            r = p.degree * abs(v) / abs(dv) if dv != 0 else mpmath.inf
            residual = max(residual, float(abs(v)))
            out.append(complex(w))
            # rounding to double adds at most one ulp of |w|
            radii.append(float(r) + 2 * _EPS * abs(complex(w)))
        return np.array(out), np.array(radii), residual


def find_roots(p: IntegerPolynomial, tol: float = DEFAULT_TOL, max_dps: int = 240, max_iter: int = 60) -> RootSet:
    """All complex roots of ``p`` with certified error radii below ``tol``.

    Radii use the inclusion bound ``d*|p(z)/p'(z)|``; precision is escalated
    through mpmath when double precision cannot certify.
    """
    if p.is_zero or p.degree < 1:
        raise ValueError("find_roots needs a nonzero polynomial of degree >= 1")
    if p.degree == 1:
        root = Fraction(-p.coefficients[0], p.coefficients[1])
        z = complex(float(root))
        r = abs(float(root) - root) if root else 0.0
        return RootSet(np.array([z]), np.array([float(r) + _EPS * abs(z)]), 1)

    # leading/trailing zero roots are exact
    k0 = next(i for i, a in enumerate(p.coefficients) if a != 0)
    q = IntegerPolynomial(p.coefficients[k0:])
    zeros = np.zeros(k0, dtype=complex)
    if q.degree == 0:
        return RootSet(zeros, np.zeros(k0), p.degree)

    z = np.roots([float(a) for a in reversed(q.coefficients)]).astype(complex)
    z = _newton_float(q, z)
    radii = _radii_float(q, z)
    z2 = _conjugate_close(z, np.maximum(radii, tol))
    if z2 is not z:
        r2 = _radii_float(q, z2)
        if r2.max() <= radii.max() or r2.max() <= tol:
            z, radii = z2, r2
    digits = 15
    if not (radii.max() <= tol and _separated(z, radii)):
        dps = 30
        residual = float("inf")
        while dps <= max_dps:
            z, radii, residual = _mp_refine(q, z, dps, max_iter)
            z = _conjugate_close(z, np.maximum(radii, tol))
            if radii.max() <= tol and _separated(z, radii):
                digits = dps
                break
            dps *= 2
        else:
            raise RootFindingError(
                f"could not certify roots of degree-{p.degree} polynomial to {tol:g}", residual=residual
            )
    z = np.concatenate([zeros, z])
    radii = np.concatenate([np.zeros(k0), radii])
    order = np.lexsort((np.round(z.imag, 12), np.round(z.real, 12)))
    return RootSet(z[order], radii[order], p.degree, digits)


def cached_roots(p: IntegerPolynomial, tol: float = DEFAULT_TOL) -> RootSet:
    """:func:`find_roots` backed by ``$ARAKELOV_CACHE_DIR`` when that variable is set.

    Entries are keyed by the coefficient list and ``tol``; a corrupt entry is
    recomputed and overwritten.
    """
    root = os.environ.get(CACHE_ENV)
    if not root:
        return find_roots(p, tol)
    key = hashlib.sha256(f"{list(p.coefficients)}|{tol!r}".encode()).hexdigest()[:32]
    path = os.path.join(root, f"roots-{key}.npz")
    try:
        with np.load(path) as f:
            return RootSet(f["roots"], f["radii"], int(f["degree"]), int(f["digits"]))
    except (OSError, KeyError, ValueError):
        pass
    rs = find_roots(p, tol)
    os.makedirs(root, exist_ok=True)
    tmp = f"{path}.{os.getpid()}.tmp.npz"
    np.savez(tmp, roots=rs.roots, radii=rs.radius_bounds, degree=rs.degree, digits=rs.digits)
    os.replace(tmp, path)
    return rs


def _separated(z: np.ndarray, r: np.ndarray) -> bool:
    """Inclusion disks are pairwise disjoint (so each holds a distinct root)."""
    if len(z) < 2:
        return True
    if len(z) > 600:
        return True  # quadratic check skipped for very large degree; radii already tiny
    d = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(d, np.inf)
    return bool(np.all(d > r[:, None] + r[None, :]))


def mahler_measure(p: IntegerPolynomial, tol: float = DEFAULT_TOL, roots: RootSet | None = None) -> float:
    """Logarithmic Mahler measure ``log|a_d| + sum max(0, log|alpha|)``.

    Polynomials with repeated roots are split into square-free parts first
    (``M`` is multiplicative), since clustered roots cannot be certified.
    """
    if p.is_zero:
        raise ValueError("Mahler measure of the zero polynomial is undefined")
    if p.degree == 0:
        return math.log(abs(p.leading))
    if roots is None:
        try:
            roots = find_roots(p, tol)
        except RootFindingError:
            c, parts = squarefree_decomposition(p)
            if len(parts) == 1 and parts[0][1] == 1:
                raise
            return math.log(abs(c)) + sum(m * mahler_measure(q, tol) for q, m in parts)
    absz = np.abs(roots.roots)
    with np.errstate(divide="ignore"):
        logs = np.log(absz)
    return math.log(abs(p.leading)) + float(np.sum(np.maximum(0.0, logs)))


def _to_sympy(p: IntegerPolynomial):
    return sympy.Poly(list(reversed(p.coefficients)), sympy.Symbol("x"), domain="ZZ")


def _from_sympy(q) -> IntegerPolynomial:
    return IntegerPolynomial([int(a) for a in reversed(q.all_coeffs())])


def squarefree_decomposition(p: IntegerPolynomial) -> tuple[int, list[tuple[IntegerPolynomial, int]]]:
    """``p = c * prod q_i^m_i`` with square-free, pairwise coprime primitive ``q_i``."""
    c, parts = _to_sympy(p).sqf_list()
    return int(c), [(_from_sympy(q), int(m)) for q, m in parts]


@lru_cache(maxsize=None)
def cyclotomic(n: int) -> IntegerPolynomial:
    """The n-th cyclotomic polynomial, by dividing x^n - 1 by lower ones."""
    if n < 1:
        raise ValueError("cyclotomic index must be >= 1")
    num = IntegerPolynomial([-1] + [0] * (n - 1) + [1])
    for d in range(1, n):
        if n % d == 0:
            num, rem = num.divmod_monic(cyclotomic(d))
            assert rem.is_zero
    return num


def euler_phi(n: int) -> int:
    result, m, p = n, n, 2
    while p * p <= m:
        if m % p == 0:
            while m % p == 0:
                m //= p
            result -= result // p
        p += 1
    if m > 1:
        result -= result // m
    return result


def _divisors(n: int, limit: int = 10**12) -> list[int] | None:
    n = abs(n)
    if n == 0 or n > limit:
        return None
    small, large = [], []
    i = 1
    while i * i <= n:
        if n % i == 0:
            small.append(i)
            if i * i != n:
                large.append(n // i)
        i += 1
    return small + large[::-1]


def rational_roots(p: IntegerPolynomial) -> list[Fraction] | None:
    """Exact rational roots by the rational root test (None if too costly)."""
    if p.coefficients[0] == 0:
        rest = rational_roots(IntegerPolynomial(p.coefficients[1:])) if p.degree > 1 else []
        return [Fraction(0)] + (rest or [])
    num = _divisors(p.coefficients[0])
    den = _divisors(p.leading)
    if num is None or den is None or len(num) * len(den) > 20000:
        return None
    found = set()
    for a in num:
        for b in den:
            for s in (1, -1):
                r = Fraction(s * a, b)
                if r not in found and p(r) == 0:
                    found.add(r)
    return sorted(found)


def irreducibility_status(p: IntegerPolynomial, known_cyclotomic: bool = False,
                          factor_degree: int = FACTOR_DEGREE) -> str:
    """'verified', 'assumed' or 'reducible'.

    Degrees up to ``factor_degree`` are settled by exact factorization over Z;
    beyond that only the rational root test runs and survivors are 'assumed'.
    """
    if p.degree < 1:
        return "reducible"
    if p.content != 1:
        return "reducible"
    if p.degree == 1 or known_cyclotomic:
        return "verified"
    if p.degree <= factor_degree:
        _, factors = _to_sympy(p).factor_list()
        return "verified" if len(factors) == 1 and factors[0][1] == 1 else "reducible"
    rr = rational_roots(p)
    if rr is None:
        return "assumed"
    if rr:
        return "reducible"
    return "assumed"


# -- point sequences -------------------------------------------------------


@dataclass(frozen=True)
class SequenceSpec:
    """Parsed form of a sequence JSON object (see :func:`parse_sequence_spec`)."""

    kind: str
    params: Mapping = field(default_factory=dict)


SEQUENCE_KINDS = ("cyclotomic", "rational", "perturbed-torsion", "explicit")


def parse_sequence_spec(obj: Mapping) -> SequenceSpec:
    kind = obj.get("kind")
    if kind not in SEQUENCE_KINDS:
        raise ValueError(f"unknown sequence kind {kind!r}; expected one of {SEQUENCE_KINDS}")
    params = {k: v for k, v in obj.items() if k != "kind"}
    return SequenceSpec(kind, params)


def _parse_rational(v) -> Fraction | None:
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity"):
        return None
    return Fraction(v)


def sequence_terms(spec: SequenceSpec | Mapping) -> Iterator[tuple[IntegerPolynomial | None, dict]]:
    """Lazy stream of ``(polynomial, metadata)``; ``None`` marks the point at infinity."""
    if not isinstance(spec, SequenceSpec):
        spec = parse_sequence_spec(spec)
    p = spec.params
    if spec.kind == "cyclotomic":
        n = int(p.get("start", 2))
        stop = p.get("max_conductor")
        count = p.get("count")
        produced = 0
        while (stop is None or n <= int(stop)) and (count is None or produced < int(count)):
            yield cyclotomic(n), {"conductor": n, "irreducibility": "verified"}
            n += 1
            produced += 1
    elif spec.kind == "rational":
        values = [_parse_rational(v) for v in p["values"]]
        for _ in range(int(p.get("cycle", 1))):
            for v in values:
                if v is None:
                    yield None, {"value": "inf", "irreducibility": "verified"}
                else:
                    yield IntegerPolynomial.linear(v), {"value": str(v), "irreducibility": "verified"}
    elif spec.kind == "explicit":
        polys = [IntegerPolynomial(c) for c in p["polynomials"]]
        for _ in range(int(p.get("cycle", 1))):
            for q in polys:
                yield q, {"irreducibility": irreducibility_status(q)}
    elif spec.kind == "perturbed-torsion":
        # x^n + e*x^j - 1 with random sign e and position j; Mahler measure <= sqrt(3)
        rng = random.Random(int(p["seed"]))
        n = int(p.get("start", 4))
        count = p.get("count")
        produced = 0
        while count is None or produced < int(count):
            while True:
                j = rng.randrange(1, n)
                e = rng.choice((-1, 1))
                coeffs = [-1] + [0] * (n - 1) + [1]
                coeffs[j] += e
                q = IntegerPolynomial(coeffs)
                if q(1) != 0 and q(-1) != 0:
                    status = irreducibility_status(q)
                    if status != "reducible":
                        break
            yield q, {"n": n, "j": j, "sign": e, "irreducibility": status}
            n += 1
            produced += 1


def sequence_generator(spec: SequenceSpec | Mapping) -> Iterator[IntegerPolynomial | None]:
    for q, _ in sequence_terms(spec):
        yield q
