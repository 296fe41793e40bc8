"""Sections of O(n) on P^1 with their archimedean sup norms.

A section of degree n is an integer vector ``(a_0, ..., a_n)``, i.e. the
polynomial ``sum a_k z^k``, equivalently the binary form
``sum a_k x1^k x0^(n-k)``.  Its pointwise norm is

    |s(z)| * base(z)^n * exp(-n f(u(z)))

with ``base = 1/max(1, |z|)`` (canonical) or ``1/sqrt(1 + |z|^2)``
(Fubini-Study) and ``f`` the metric twist.

Sup norms are returned as certified brackets.  Two certification modes:

* circle mode (canonical base, constant twist): the sup over the sphere equals
  the sup over ``|z| = 1`` by the maximum modulus principle applied to ``s`` and
  to its reversal; ``P = |s|^2`` is a trigonometric polynomial of degree n so
  Bernstein's inequality ``|P''| <= n^2 max P`` drives a 1-d branch and bound;
* sphere mode (everything else): branch and bound over boxes in polar
  coordinates ``(phi, theta)``, using Lipschitz bounds of the untwisted norm
  (Kellogg for Fubini-Study, Bernstein on the disc for canonical) and of the
  twist polynomial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificationError
from .heights import AdelicMetric

_EPS = np.finfo(float).eps
_SAFETY = 1e-12
DEFAULT_RTOL = 1e-7
DEFAULT_BUDGET = 4_000_000
FALLBACK_RTOL = 1e-4  # accepted bracket width when the budget runs out


@dataclass(frozen=True)
class NormBound:
    lower: float
    upper: float
    exact: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        object.__setattr__(self, "exact", bool(self.exact))
        if self.lower > self.upper:
            raise ValueError(f"empty bracket [{self.lower}, {self.upper}]")

    @property
    def value(self) -> float:
        return self.lower if self.exact else 0.5 * (self.lower + self.upper)

    def __float__(self) -> float:
        return self.value

    def scale(self, c: float) -> "NormBound":
        return NormBound(self.lower * c, self.upper * c, self.exact)


def fs_monomial_norm(n: int, k: int) -> float:
    """``sup |x1|^k |x0|^(n-k)`` over unit vectors of C^2."""
    if n == 0:
        return 1.0
    lg = 0.0
    for j in (k, n - k):
        if j:
            lg += j * math.log(j)
    return math.exp(0.5 * (lg - n * math.log(n)))


@dataclass(eq=False)
class SectionSpace:
    """Global sections of ``L^n`` for an adelic metric ``L`` on O(1), rank ``n + 1``."""

    n: int
    metric: AdelicMetric = field(default_factory=AdelicMetric)
    rtol: float = DEFAULT_RTOL
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be non-negative")
        self._cache: dict = {}

    @property
    def rank(self) -> int:
        return self.n + 1

    @property
    def is_radial(self) -> bool:
        return self.metric.is_radial

    @property
    def circle_mode(self) -> bool:
        return self.metric.base == "canonical" and self.metric.twist.is_constant

    @property
    def twist_factor(self) -> float:
        """``exp(-n c)`` for a constant twist ``c``."""
        return math.exp(-self.n * self.metric.twist.constant_term)

    def basis_norms(self) -> np.ndarray:
        """Sup norms of the untwisted monomials z^k."""
        if self.metric.base == "canonical":
            return np.ones(self.rank)
        return np.array([fs_monomial_norm(self.n, k) for k in range(self.rank)])

    def pointwise(self, s, z) -> np.ndarray:
        """Pointwise norm of ``s`` at chart values ``z`` (``inf`` allowed)."""
        a = self._coeffs(s)
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        inf = ~np.isfinite(z)
        zz = np.where(inf, 0, z)
        # homogeneous coordinates normalized by the base metric
        if self.metric.base == "canonical":
            scale = np.maximum(1.0, np.abs(zz))
        else:
            scale = np.sqrt(1.0 + np.abs(zz) ** 2)
        x0 = np.where(inf, 0.0, 1.0 / scale)
        x1 = np.where(inf, 1.0, zz / scale)
        vals = np.abs(_binary_form(a, x0, x1))
        if not self.metric.twist.is_zero:
            vals = vals * np.exp(-self.n * self.metric.twist.at(z))
        return vals

    def _coeffs(self, s) -> np.ndarray:
        a = np.asarray([float(c) for c in s])
        if len(a) != self.rank:
            raise ValueError(f"section has {len(a)} coefficients, expected {self.rank}")
        return a

    def sup_norm(self, s) -> NormBound:
        key = tuple(int(c) for c in s)
        if key not in self._cache:
            self._cache[key] = self._sup_norm(key)
        return self._cache[key]

    def _sup_norm(self, key: tuple) -> NormBound:
        a = self._coeffs(key)
        if not np.any(a):
            raise ValueError("the zero section has no sup norm to certify")
        support = np.flatnonzero(a)
        if len(support) == 1 and self.metric.twist.is_constant:
            k = int(support[0])
            v = abs(a[k]) * self.basis_norms()[k] * self.twist_factor
            return NormBound(v, v, exact=True)
        if self.circle_mode:
            lo, up = _circle_sup(a, self.rtol, self.budget)
            c = self.twist_factor
            return NormBound(lo * c, up * c)
        theta_free = not (len(support) == 1 and self.is_radial)
        self_ref = self.metric.base == "fubini-study" and self.metric.twist.is_constant
        u_fs = None if self_ref else self._untwisted_upper(a)
        return _sphere_sup(a, self.n, self.metric, self.rtol, self.budget, theta_free, u_fs)

    def _untwisted_upper(self, a: np.ndarray) -> float:
        plain = SectionSpace(self.n, AdelicMetric("fubini-study"), max(self.rtol, 1e-4), self.budget)
        return plain.sup_norm(tuple(int(c) for c in a)).upper

    def monomial_norm(self, k: int) -> NormBound:
        e = [0] * self.rank
        e[k] = 1
        return self.sup_norm(e)

    def lower_gram(self) -> np.ndarray:
        """Gram matrix ``Q`` with ``sqrt(a^T Q a) <= ||a||_sup`` for all real ``a``.

        Any probability average of ``|s|^2`` is at most ``sup |s|^2``; we average
        over a latitude-longitude grid (or the unit circle in circle mode).
        """
        n = self.n
        if self.circle_mode:
            return np.eye(self.rank) * self.twist_factor**2
        n_lat, n_lon = 2 * n + 3, 2 * n + 2
        phi = np.pi * (np.arange(n_lat) + 0.5) / n_lat
        theta = 2 * np.pi * np.arange(n_lon) / n_lon
        P, T = np.meshgrid(phi, theta, indexing="ij")
        P, T = P.ravel(), T.ravel()
        x0, x1 = _homog(P, T, self.metric.base)
        V = x1[:, None] ** np.arange(self.rank) * x0[:, None] ** (n - np.arange(self.rank))
        w = np.exp(-2 * n * self.metric.twist(*_sphere_point(P, T)))
        Q = np.real(V.conj().T @ (w[:, None] * V)) / len(P)
        return 0.5 * (Q + Q.T) * (1 - 1e-10)


def _binary_form(a: np.ndarray, x0: np.ndarray, x1: np.ndarray) -> np.ndarray:
    # direct power sum rather than Horner: well defined at x0 = 0
    n = len(a) - 1
    k = np.arange(n + 1)
    return (x1[..., None] ** k * x0[..., None] ** (n - k)) @ a.astype(complex)


def _sphere_point(phi, theta):
    s = np.sin(phi)
    return s * np.cos(theta), s * np.sin(theta), -np.cos(phi)


def _homog(phi, theta, base: str):
    x0 = np.cos(phi / 2)
    x1 = np.sin(phi / 2) * np.exp(1j * theta)
    if base == "canonical":
        m = np.maximum(np.abs(x0), np.abs(x1))
        return x0 / m, x1 / m
    return x0.astype(complex), x1


def _circle_sup(a: np.ndarray, rtol: float, budget: int) -> tuple[float, float]:
    """Certified bracket for ``max_{|z|=1} |p(z)|``."""
    n = len(a) - 1
    if n == 0:
        return abs(a[0]), abs(a[0])
    k = np.arange(n + 1)
    ac = a.astype(complex)

    def evaluate(theta):
        e = np.exp(1j * np.outer(theta, k))
        p = e @ ac
        dp = e @ (1j * k * ac)
        P = np.abs(p) ** 2
        dP = 2 * np.real(np.conj(p) * dp)
        return P, dP

    N = 64 * (n + 1)
    h = 2 * np.pi / N
    centers = h * (np.arange(N) + 0.5)
    P, dP = evaluate(centers)
    n2 = float(n * n)
    # Taylor about the center with |P''| <= n^2 max P; solve for max P
    U2 = np.max(P + np.abs(dP) * h / 2) / (1 - n2 * h * h / 8)
    L2 = P.max()
    half = np.full(N, h / 2)
    used = N
    while True:
        bound = P + np.abs(dP) * half + 0.5 * n2 * U2 * half**2
        U2 = max(L2, bound.max())
        if math.sqrt(U2) <= math.sqrt(L2) * (1 + rtol):
            break
        live = bound > L2
        centers, half = centers[live], half[live] / 2
        centers = np.concatenate([centers - half, centers + half])
        half = np.concatenate([half, half])
        used += len(centers)
        if used > budget:
            raise CertificationError(f"circle sup not certified within {budget} evaluations")
        P, dP = evaluate(centers)
        L2 = max(L2, P.max())
    abs_err = 4 * (n + 1) * _EPS * np.sum(np.abs(a))
    lo = math.sqrt(L2) * (1 - _SAFETY)
    up = math.sqrt(U2) * (1 + _SAFETY) + abs_err
    return lo - abs_err, up


def _sphere_sup(a: np.ndarray, n: int, metric: AdelicMetric, rtol: float, budget: int,
                theta_free: bool, u_fs: float | None) -> NormBound:
    """Branch and bound for the sup of ``G = sqrt(F)``, ``F = |S|^2 exp(-2n f_tot)``.

    ``S`` is evaluated on unit vectors of C^2, so ``|S|`` is the untwisted
    Fubini-Study norm; the canonical base is folded into ``f_tot`` as the
    smooth-per-hemisphere function ``1/2 log((1 -+ u3)/2)``.  Cells never
    straddle the equator.  Along a unit-speed geodesic, ``|S|^2`` is an
    exponential sum of type ``n``, hence ``|P'| <= n U``, ``|P''| <= n^2 U``
    with ``U >= sup |S|^2`` (``u_fs`` squared, or self-referential when the
    twist is constant and the base is Fubini-Study).
    """
    twist = metric.twist
    canonical = metric.base == "canonical"
    L = twist.lipschitz + (0.5 if canonical else 0.0)
    H = twist.hessian_bound + (0.5 if canonical else 0.0)
    self_ref = u_fs is None
    c0 = math.exp(-n * twist.constant_term)
    k = np.arange(n + 1)
    ac = a.astype(complex)
    crude_fs = float(np.sum(np.abs(a) * np.array([fs_monomial_norm(n, j) for j in k])))

    def evaluate(phi, theta):
        c2, s2 = np.cos(phi / 2)[:, None], np.sin(phi / 2)[:, None]
        e = np.exp(1j * np.outer(theta, k))
        T = c2 ** (n - k) * s2**k * e
        S = T @ ac
        S_t = T @ (1j * k * ac)
        dT = 0.5 * (k * c2 ** np.maximum(n - k + 1, 0) * s2 ** np.maximum(k - 1, 0)
                    - (n - k) * c2 ** np.maximum(n - k - 1, 0) * s2 ** (k + 1)) * e
        S_p = dT @ ac
        P = np.abs(S) ** 2
        P_p = 2 * np.real(np.conj(S) * S_p)
        P_t = 2 * np.real(np.conj(S) * S_t)
        u1, u2, u3 = _sphere_point(phi, theta)
        du_p = (np.cos(phi) * np.cos(theta), np.cos(phi) * np.sin(theta), np.sin(phi))
        du_t = (-u2, u1, np.zeros_like(u3))
        f = twist(u1, u2, u3)
        g = twist.gradient(u1, u2, u3)
        if canonical:
            south = u3 <= 0
            f = f + np.where(south, 0.5 * np.log((1 - u3) / 2), 0.5 * np.log((1 + u3) / 2))
            g = (g[0], g[1], g[2] + np.where(south, -0.5 / (1 - u3), 0.5 / (1 + u3)))
        f_p = sum(gi * di for gi, di in zip(g, du_p))
        f_t = sum(gi * di for gi, di in zip(g, du_t))
        W = np.exp(-2 * n * f)
        F = P * W
        F_p = W * (P_p - 2 * n * P * f_p)
        F_t = W * (P_t - 2 * n * P * f_t)
        grad = np.sqrt(F_p**2 + (F_t / np.sin(phi)) ** 2)
        return F, grad, W

    n_phi = 4 * (n + 1) + 4
    n_theta = 8 * (n + 1) + 8 if theta_free else 1
    dphi = np.pi / n_phi
    dtheta = 2 * np.pi / n_theta if theta_free else 0.0
    P0, T0 = np.meshgrid(dphi * (np.arange(n_phi) + 0.5), dtheta * (np.arange(n_theta) + 0.5), indexing="ij")
    phi, theta = P0.ravel(), T0.ravel()
    hp = np.full(len(phi), dphi / 2)
    ht = np.full(len(phi), dtheta / 2)
    F, grad, W = evaluate(phi, theta)
    lower = float(F.max())
    f_lo = twist.bounds()[0] + (0.5 * math.log(0.5) if canonical else 0.0)
    upper = (crude_fs**2) * math.exp(-2 * n * f_lo)
    used = len(phi)
    coef = n * n + 4 * n * n * L + 4 * n * n * L * L + 2 * n * (H + L)
    while True:
        smax = np.where((phi - hp <= np.pi / 2) & (phi + hp >= np.pi / 2), 1.0,
                        np.maximum(np.sin(np.clip(phi - hp, 0, np.pi)), np.sin(np.clip(phi + hp, 0, np.pi))))
        delta = hp + smax * ht
        U_P = upper / c0**2 if self_ref else u_fs**2
        W_max = W * np.exp(2 * n * L * delta)
        bound = F + grad * delta + 0.5 * coef * U_P * W_max * delta**2
        upper = min(upper, max(lower, float(bound.max())))
        if math.sqrt(upper) <= math.sqrt(lower) * (1 + rtol):
            break
        live = bound > lower
        phi, theta, hp, ht, smax = phi[live], theta[live], hp[live], ht[live], smax[live]
        split_phi = hp >= smax * ht
        hp2 = np.where(split_phi, hp / 2, hp)
        ht2 = np.where(split_phi, ht, ht / 2)
        off_p = np.where(split_phi, hp2, 0.0)
        off_t = np.where(split_phi, 0.0, ht2)
        phi = np.concatenate([phi - off_p, phi + off_p])
        theta = np.concatenate([theta - off_t, theta + off_t])
        hp = np.concatenate([hp2, hp2])
        ht = np.concatenate([ht2, ht2])
        used += len(phi)
        if used > budget:
            # a wider bracket is still certified; refuse only when it is uselessly wide
            if math.sqrt(upper) <= math.sqrt(lower) * (1 + FALLBACK_RTOL):
                break
            raise CertificationError(
                f"sup norm not certified within {budget} evaluations "
                f"(bracket [{math.sqrt(lower)}, {math.sqrt(upper)}])")
        F, grad, W = evaluate(phi, theta)
        lower = max(lower, float(F.max()))
    abs_err = 4 * (n + 1) * _EPS * crude_fs * math.exp(-n * f_lo)
    return NormBound(math.sqrt(lower) * (1 - _SAFETY) - abs_err, math.sqrt(upper) * (1 + _SAFETY) + abs_err)
