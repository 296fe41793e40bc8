"""Positively homogeneous functions on integer semigroups and their differentials.

Built-in functions are sums of minima of integer linear forms, evaluated in
exact integer arithmetic.  Such a function is super-additive and positively
homogeneous, and ``n -> f(n x + w) - f(n x)`` is non-decreasing; its limit is
``D_x f(w) = sum over terms of min over forms active at x of l(w)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

Vector = tuple[int, ...]


def _dot(a: Sequence[int], b: Sequence[int]) -> int:
    return sum(int(x) * int(y) for x, y in zip(a, b))


@dataclass(frozen=True)
class HalfSpaceSemigroup:
    """``{x in Z^k : c . x >= b for every constraint (c, b)}`` with ``b >= 0``."""

    dim: int
    constraints: tuple = ()

    def __init__(self, dim: int, constraints: Sequence = ()):
        cons = tuple((tuple(int(v) for v in c), int(b)) for c, b in constraints)
        for c, b in cons:
            if len(c) != dim:
                raise ValueError("constraint dimension mismatch")
            if b < 0:
                raise ValueError("a constraint c.x >= b with b < 0 is not closed under addition")
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "constraints", cons)

    def __contains__(self, x) -> bool:
        return all(_dot(c, x) >= b for c, b in self.constraints)

    def to_json(self) -> dict:
        return {"dim": self.dim, "constraints": [{"c": list(c), "b": b} for c, b in self.constraints]}


@dataclass(frozen=True)
class HomogeneousFunctionOnSemigroup:
    """``f(x) = sum_t min_{l in terms[t]} l . x`` on a semigroup.

    A single term with a single form is a linear function.
    """

    terms: tuple
    semigroup: HalfSpaceSemigroup

    def __init__(self, terms: Sequence[Sequence[Sequence[int]]], semigroup: HalfSpaceSemigroup | None = None):
        ts = tuple(tuple(tuple(int(v) for v in form) for form in t) for t in terms)
        if not ts or any(not t for t in ts):
            raise ValueError("need at least one non-empty term")
        dim = len(ts[0][0])
        if any(len(form) != dim for t in ts for form in t):
            raise ValueError("all forms must have the same dimension")
        object.__setattr__(self, "terms", ts)
        object.__setattr__(self, "semigroup", semigroup or HalfSpaceSemigroup(dim))

    @classmethod
    def min_of_forms(cls, forms, semigroup=None) -> "HomogeneousFunctionOnSemigroup":
        return cls([forms], semigroup)

    @classmethod
    def linear(cls, form, semigroup=None) -> "HomogeneousFunctionOnSemigroup":
        return cls([[form]], semigroup)

    @property
    def dim(self) -> int:
        return len(self.terms[0][0])

    def __add__(self, other: "HomogeneousFunctionOnSemigroup") -> "HomogeneousFunctionOnSemigroup":
        return HomogeneousFunctionOnSemigroup(self.terms + other.terms, self.semigroup)

    def __call__(self, x) -> int:
        return sum(min(_dot(l, x) for l in t) for t in self.terms)

    def active_forms(self, x) -> list[list[Vector]]:
        out = []
        for t in self.terms:
            v = min(_dot(l, x) for l in t)
            out.append(sorted({l for l in t if _dot(l, x) == v}))
        return out

    def differential(self, x, w) -> int:
        """``lim f(n x + w) - f(n x)``."""
        return sum(min(_dot(l, w) for l in act) for act in self.active_forms(x))

    def differentiable_at(self, x) -> bool:
        return all(len(act) == 1 for act in self.active_forms(x))

    @property
    def is_linear(self) -> bool:
        return all(len(set(t)) == 1 for t in self.terms)

    def to_json(self) -> dict:
        return {"terms": [[list(l) for l in t] for t in self.terms], "semigroup": self.semigroup.to_json()}


@dataclass
class SandwichReport:
    x: Vector
    w: Vector
    n0: int
    differences: list
    monotone: bool
    limit: int
    predicted: int
    differentiable: bool
    additive_on_axes: bool
    g_value: int | None
    hypothesis: dict
    converges_to_g: bool | None
    lemma: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        good = self.monotone and self.limit == self.predicted
        good &= self.differentiable == self.additive_on_axes
        if self.converges_to_g is not None:
            good &= self.converges_to_g
        return good and self.lemma.get("consistent", True)

    def to_json(self) -> dict:
        return {"x": list(self.x), "w": list(self.w), "n0": self.n0, "differences": self.differences,
                "monotone": self.monotone, "limit": self.limit, "predicted": self.predicted,
                "differentiable": self.differentiable, "additive_on_axes": self.additive_on_axes,
                "g_differential": self.g_value, "hypothesis": self.hypothesis,
                "converges_to_g": self.converges_to_g, "lemma": self.lemma, "ok": self.ok}


def _box(dim: int, radius: int) -> list[Vector]:
    axes = [np.arange(-radius, radius + 1)] * dim
    return [tuple(int(v) for v in p) for p in np.array(np.meshgrid(*axes, indexing="ij")).reshape(dim, -1).T]


def lemma_check(phi, psi, samples: Sequence[Vector]) -> dict:
    """Super-additive ``phi`` dominating additive ``psi`` must equal it.

    Domination is tested on ``samples`` and their negatives; when it holds the
    equality ``phi = psi`` is asserted on the same points.
    """
    pts = list(samples) + [tuple(-v for v in s) for s in samples]
    dominated = all(phi(p) >= psi(p) for p in pts)
    equal = all(phi(p) == psi(p) for p in pts)
    return {"dominates": dominated, "equal": equal, "consistent": (not dominated) or equal}


def sandwich_differential(f: HomogeneousFunctionOnSemigroup, g: HomogeneousFunctionOnSemigroup | None,
                          x, w, N: int = 64, box: int = 6) -> SandwichReport:
    """Difference sequence ``f(n x + w) - f(n x)`` for ``n0 <= n <= N`` and its limit.

    ``g`` is the comparison function of the differentiability criterion.
    Whether ``f >= g`` or ``g >= f`` on the semigroup (sampled in a box) and
    ``f(x) = g(x)`` hold is reported, not assumed.
    """
    x, w = tuple(int(v) for v in x), tuple(int(v) for v in w)
    C = f.semigroup
    if x not in C:
        raise ValueError(f"{x} is not in the semigroup")
    inside = [tuple(n * a + b for a, b in zip(x, w)) in C for n in range(N + 1)]
    n0 = next((n for n in range(1, N + 1) if all(inside[n:])), None)
    if n0 is None:
        raise ValueError(f"no n0 <= {N} with n x + w in the semigroup")
    diffs = [f(tuple(n * a + b for a, b in zip(x, w))) - f(tuple(n * a for a in x)) for n in range(n0, N + 1)]
    monotone = all(b >= a for a, b in zip(diffs, diffs[1:]))
    predicted = f.differential(x, w)
    diff_ok = f.differentiable_at(x)
    dim = f.dim
    axes = [tuple(int(i == j) for j in range(dim)) for i in range(dim)]
    additive = all(f.differential(x, e) + f.differential(x, tuple(-v for v in e)) == 0 for e in axes)
    hyp: dict = {}
    g_val = None
    conv = None
    lemma: dict = {}
    if g is not None:
        pts = [p for p in _box(dim, box) if p in C]
        hyp = {"f_ge_g_on_sample": all(f(p) >= g(p) for p in pts),
               "g_ge_f_on_sample": all(g(p) >= f(p) for p in pts),
               "f_eq_g_at_x": f(x) == g(x), "g_additive": g.is_linear, "sample_size": len(pts)}
        g_val = g.differential(x, w)
        if hyp["f_eq_g_at_x"] and g.is_linear:
            # f >= g squeezes the differences from below; g >= f only pins the
            # limit when f itself has a single active form at x
            if hyp["f_ge_g_on_sample"] or (hyp["g_ge_f_on_sample"] and diff_ok):
                conv = diffs[-1] == g_val
        sample = [p for p in _box(dim, 3) if any(p)]
        lemma = lemma_check(lambda v: f.differential(x, v), lambda v: g.differential(x, v), sample)
    return SandwichReport(x, w, n0, diffs, monotone, diffs[-1], predicted, diff_ok, additive,
                          g_val, hyp, conv, lemma)


def random_case(rng: np.random.Generator, n_forms: int = 3, coef: int = 4, tie: bool = False):
    """A random min-of-forms function on a half-plane semigroup of Z^2, a base point, a direction."""
    while True:
        forms = [tuple(int(v) for v in rng.integers(-coef, coef + 1, 2)) for _ in range(n_forms)]
        if len(set(forms)) < 2:
            continue
        c = tuple(int(v) for v in rng.integers(-2, 3, 2))
        if c == (0, 0):
            continue
        C = HalfSpaceSemigroup(2, [(c, int(rng.integers(0, 3)))])
        f = HomogeneousFunctionOnSemigroup.min_of_forms(forms, C)
        if tie:
            a, b = forms[0], next(l for l in forms if l != forms[0])
            d = (a[0] - b[0], a[1] - b[1])
            x = (d[1], -d[0])  # a.x == b.x
            if x == (0, 0):
                continue
            for s in (1, -1, 2, -2, 3):
                xs = (s * x[0], s * x[1])
                if xs in C and len(f.active_forms(xs)[0]) >= 2:
                    break
            else:
                continue
            x = xs
        else:
            x = tuple(int(v) for v in rng.integers(-5, 6, 2))
            if x not in C or not f.differentiable_at(x):
                continue
        if _dot(c, x) <= 0:
            continue
        w = tuple(int(v) for v in rng.integers(-6, 7, 2))
        return f, x, w
