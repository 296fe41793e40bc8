"""Lattice reduction helpers for the integer lattice under a positive quadratic form.

Small ranks only (at most a few dozen), so plain floating-point LLL and a
recursive Fincke-Pohst enumeration are adequate.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import CapExceeded


def gram_schmidt(B: np.ndarray, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(mu, bstar_sq)`` for the rows of ``B`` under ``<x, y> = x^T Q y``."""
    G = B @ Q @ B.T
    n = len(B)
    mu = np.zeros((n, n))
    r = np.zeros((n, n))
    bsq = np.zeros(n)
    for i in range(n):
        for j in range(i):
            r[i, j] = G[i, j] - np.dot(mu[j, :j], r[i, :j])
            mu[i, j] = r[i, j] / bsq[j]
        bsq[i] = G[i, i] - np.dot(mu[i, :i], r[i, :i])
    return mu, bsq


def lll(Q: np.ndarray, B: np.ndarray | None = None, delta: float = 0.99,
        max_iter: int = 100_000) -> np.ndarray:
    """LLL-reduce the integer basis ``B`` (rows; identity by default) w.r.t. ``Q``."""
    n = Q.shape[0]
    B = np.eye(n, dtype=np.int64) if B is None else np.array(B, dtype=np.int64)
    k = 1
    it = 0
    mu, bsq = gram_schmidt(B.astype(float), Q)
    while k < n:
        it += 1
        if it > max_iter:
            raise CapExceeded("LLL did not converge")
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q:
                B[k] -= q * B[j]
                mu, bsq = gram_schmidt(B.astype(float), Q)
        if bsq[k] >= (delta - mu[k, k - 1] ** 2) * bsq[k - 1]:
            k += 1
        else:
            B[[k - 1, k]] = B[[k, k - 1]]
            mu, bsq = gram_schmidt(B.astype(float), Q)
            k = max(k - 1, 1)
    return B


def _exact_bstar_sq(B: np.ndarray, Q: np.ndarray) -> list[Fraction]:
    """``|b*_j|^2`` in exact rational arithmetic for the float matrix ``Q``.

    ``Q`` is scaled by a power of two to an integer matrix; the Gram-Schmidt
    norms are ratios of consecutive leading principal minors of ``B Q B^T``,
    all of which come out of one fraction-free (Bareiss) elimination.
    """
    fr = [[Fraction(float(v)) for v in row] for row in Q]
    den = max(f.denominator for row in fr for f in row)  # a power of two
    Qi = [[int(f * den) for f in row] for row in fr]
    Bi = [[int(v) for v in row] for row in B]
    n = len(Bi)
    BQ = [[sum(b[k] * Qi[k][j] for k in range(len(b)) if b[k]) for j in range(len(Qi))] for b in Bi]
    M = [[sum(x * y for x, y in zip(BQ[i], Bi[j])) for j in range(n)] for i in range(n)]
    minors, prev = [], 1
    for k in range(n):
        if M[k][k] == 0:
            raise ArithmeticError("Gram matrix is not positive definite")
        minors.append(M[k][k])
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    out, last = [], 1
    for d in minors:
        out.append(Fraction(d, last * den))
        last = d
    return out


def _sqrt_down(q: Fraction) -> float:
    if q <= 0:
        return 0.0
    s = math.sqrt(float(q))
    while Fraction(s) ** 2 > q:
        s = math.nextafter(s, 0.0)
    return s


def minima_lower_bounds(B: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """``lambda_i >= min_{j >= i} |b*_j|`` for the Q-norm, any basis ordering.

    Exact for the given float ``Q`` (square roots rounded down).
    """
    b = np.array([_sqrt_down(q) for q in _exact_bstar_sq(B, Q)])
    return np.minimum.accumulate(b[::-1])[::-1]


def fincke_pohst(Q: np.ndarray, radius: float, limit: int = 1_000_000,
                 B: np.ndarray | None = None) -> list[tuple[int, ...]]:
    """Nonzero integer vectors ``x`` with ``x^T Q x <= radius^2``, one of each ``+-x`` pair.

    Enumeration runs in the coordinates of a reduced basis ``B`` (computed if
    not given) and results are mapped back to standard coordinates.
    """
    n = Q.shape[0]
    if B is None:
        B = lll(Q)
    G = B @ Q @ B.T
    G = 0.5 * (G + G.T)
    R = np.linalg.cholesky(G).T  # upper triangular, G = R^T R
    r2 = radius * radius * (1 + 1e-9)
    out: list[tuple[int, ...]] = []
    y = np.zeros(n, dtype=np.int64)

    def rec(i: int, rem: float):
        # sum_{j>i} contributions already fixed; choose y_i
        c = -sum(R[i, j] * y[j] for j in range(i + 1, n)) / R[i, i]
        w = math.sqrt(max(rem, 0.0)) / abs(R[i, i])
        for v in range(math.ceil(c - w - 1e-12), math.floor(c + w + 1e-12) + 1):
            t = R[i, i] * (v - c)
            left = rem - t * t
            if left < -1e-12 * r2:
                continue
            y[i] = v
            if i == 0:
                if y.any():
                    out.append(tuple(int(x) for x in y @ B))
                    if len(out) > 2 * limit:
                        raise CapExceeded(f"more than {limit} lattice vectors within radius {radius}")
            else:
                rec(i - 1, left)
        y[i] = 0

    rec(n - 1, r2)
    seen: set = set()
    uniq = []
    for x in out:
        neg = tuple(-v for v in x)
        if neg in seen:
            continue
        seen.add(x)
        uniq.append(x)
    if len(uniq) > limit:
        raise CapExceeded(f"more than {limit} lattice vectors within radius {radius}")
    return uniq


def is_primitive(x: Sequence[int]) -> bool:
    g = 0
    for v in x:
        g = math.gcd(g, int(v))
    return g == 1


class IndependenceTracker:
    """Incremental exact rank test for integer vectors (fraction-free elimination)."""

    def __init__(self):
        self.rows: list[tuple[int, list[int]]] = []  # (pivot column, row)

    def reduce(self, x: Sequence[int]) -> list[int]:
        v = [int(a) for a in x]
        for p, row in self.rows:
            if v[p]:
                a, b = row[p], v[p]
                v = [a * vi - b * ri for vi, ri in zip(v, row)]
                g = 0
                for vi in v:
                    g = math.gcd(g, vi)
                if g > 1:
                    v = [vi // g for vi in v]
        return v

    def add(self, x: Sequence[int]) -> bool:
        v = self.reduce(x)
        for p, vi in enumerate(v):
            if vi:
                self.rows.append((p, v))
                return True
        return False

    @property
    def rank(self) -> int:
        return len(self.rows)


def integer_rank(vectors: Iterable[Sequence[int]]) -> int:
    t = IndependenceTracker()
    for v in vectors:
        t.add(v)
    return t.rank


def greedy_minima(candidates: Sequence[Sequence[int]], values: Sequence[float], rank: int) -> list[float]:
    """Successive-minima values of a norm restricted to ``candidates``.

    Matroid greedy: scan by increasing value and keep vectors that raise the
    rank.  Returns fewer than ``rank`` values if the candidates do not span.
    """
    order = sorted(range(len(candidates)), key=lambda i: (values[i], tuple(candidates[i])))
    t = IndependenceTracker()
    out = []
    for i in order:
        if t.add(candidates[i]):
            out.append(float(values[i]))
            if len(out) == rank:
                break
    return out
