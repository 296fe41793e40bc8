"""Atomic measures on the Riemann sphere and step measures on the real line."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import MeasureError

WEIGHT_TOL = 1e-12
CIRCLE_TOL = 1e-9
TIE_TOL = 1e-12


def sphere_coords(z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Chart value(s) -> unit-sphere coordinates; ``inf`` maps to (0, 0, 1)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    inf = ~np.isfinite(z)
    zz = np.where(inf, 0.0, z)
    r2 = np.abs(zz) ** 2
    d = 1.0 + r2
    u1 = np.where(inf, 0.0, 2.0 * zz.real / d)
    u2 = np.where(inf, 0.0, 2.0 * zz.imag / d)
    u3 = np.where(inf, 1.0, (r2 - 1.0) / d)
    return u1, u2, u3


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Finite atomic probability measure; atoms equal to ``inf`` sit at infinity."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=complex))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if pts.shape != w.shape or pts.ndim != 1 or len(pts) == 0:
            raise MeasureError("points and weights must be non-empty 1-d arrays of equal length")
        if np.any(w <= 0):
            raise MeasureError("weights must be positive")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise MeasureError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> "EmpiricalMeasure":
        pts = np.atleast_1d(np.asarray(points, dtype=complex))
        return cls(pts, np.full(len(pts), 1.0 / len(pts)))

    @classmethod
    def dirac(cls, z) -> "EmpiricalMeasure":
        return cls(np.array([z], dtype=complex), np.array([1.0]))

    @classmethod
    def haar_grid(cls, m: int, offset: float = 0.0) -> "EmpiricalMeasure":
        """Uniform m-point discretization of Haar measure on the unit circle."""
        return cls.uniform(np.exp(1j * (offset + 2 * np.pi * np.arange(m) / m)))

    def __len__(self) -> int:
        return len(self.points)

    def sphere(self):
        return sphere_coords(self.points)

    def on_unit_circle(self, tol: float = CIRCLE_TOL) -> bool:
        return bool(np.all(np.isfinite(self.points)) and np.all(np.abs(np.abs(self.points) - 1) <= tol))

    def to_json(self) -> dict:
        atoms = []
        for z, w in zip(self.points, self.weights):
            if np.isfinite(z):
                atoms.append({"re": float(z.real), "im": float(z.imag), "w": float(w)})
            else:
                atoms.append({"inf": True, "w": float(w)})
        return {"atoms": atoms}

    @classmethod
    def from_json(cls, obj: Mapping) -> "EmpiricalMeasure":
        pts = [complex("inf") if a.get("inf") else complex(a["re"], a["im"]) for a in obj["atoms"]]
        return cls(np.array(pts), np.array([a["w"] for a in obj["atoms"]]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["re", "im", "w"])
        for z, w in zip(self.points, self.weights):
            wr.writerow([repr(float(z.real)), repr(float(z.imag)), repr(float(w))])
        return buf.getvalue()


def integrate(f: Callable, m: EmpiricalMeasure, vectorized: bool = False) -> float:
    """``sum_i w_i f(z_i)``; raises MeasureError if f is undefined at an atom."""
    if vectorized:
        with np.errstate(all="ignore"):
            vals = np.asarray(f(m.points), dtype=float)
        bad = ~np.isfinite(vals)
        if bad.any():
            raise MeasureError(f"test function undefined at atom {m.points[bad][0]!r}")
        return float(np.dot(m.weights, vals))
    total = 0.0
    for z, w in zip(m.points, m.weights):
        try:
            v = float(f(z))
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise MeasureError(f"test function undefined at atom {z!r}: {exc}") from exc
        if not math.isfinite(v):
            raise MeasureError(f"test function undefined at atom {z!r}")
        total += w * v
    return total


def _circle_angles(m: EmpiricalMeasure, tol: float) -> np.ndarray:
    if not m.on_unit_circle(tol):
        raise MeasureError("measure is not supported on the unit circle")
    return np.mod(np.angle(m.points), 2 * np.pi)


def _cdf(x: np.ndarray, w: np.ndarray, t: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    cum = np.concatenate([[0.0], np.cumsum(w[order])])
    return cum[np.searchsorted(x[order], t, side="right")]


def wasserstein_circle(a: EmpiricalMeasure, b: EmpiricalMeasure, tol: float = CIRCLE_TOL) -> float:
    """Order-1 transport distance on the unit circle (arc-length metric).

    Uses ``W1 = min_c int |F_a - F_b - c| dtheta``; the minimizing rotation
    ``c`` is a weighted median of the CDF difference.
    """
    ta = _circle_angles(a, tol)
    tb = _circle_angles(b, tol)
    grid = np.unique(np.concatenate([ta, tb, [0.0, 2 * np.pi]]))
    grid = grid[(grid >= 0) & (grid <= 2 * np.pi)]
    left = grid[:-1]
    lengths = np.diff(grid)
    diff = _cdf(ta, a.weights, left) - _cdf(tb, b.weights, left)
    keep = lengths > 0
    diff, lengths = diff[keep], lengths[keep]
    order = np.argsort(diff, kind="stable")
    cum = np.cumsum(lengths[order])
    c = diff[order][np.searchsorted(cum, 0.5 * cum[-1])]
    return float(np.sum(np.abs(diff - c) * lengths))


@dataclass(frozen=True)
class StepMeasure:
    """Atoms at strictly increasing points ``t`` with positive masses summing to 1.

    Mass sits exactly at the jump locations of ``t -> rank F_t``; equal values
    are merged into one atom.
    """

    breakpoints: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.breakpoints, dtype=float))
        m = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if t.shape != m.shape or len(t) == 0:
            raise MeasureError("breakpoints and masses must be non-empty and of equal length")
        if np.any(np.diff(t) <= 0):
            raise MeasureError("breakpoints must be strictly increasing")
        if np.any(m <= 0) or abs(m.sum() - 1.0) > WEIGHT_TOL:
            raise MeasureError("masses must be positive and sum to 1")
        object.__setattr__(self, "breakpoints", t)
        object.__setattr__(self, "masses", m)

    @classmethod
    def from_values(cls, values: Sequence[float], weights: Sequence[float] | None = None,
                    tie_tol: float = TIE_TOL) -> "StepMeasure":
        v = np.asarray(values, dtype=float)
        w = np.full(len(v), 1.0 / len(v)) if weights is None else np.asarray(weights, dtype=float)
        order = np.argsort(v, kind="stable")
        v, w = v[order], w[order]
        pts, ms = [v[0]], [w[0]]
        for x, wx in zip(v[1:], w[1:]):
            if x - pts[-1] <= tie_tol:
                ms[-1] += wx
            else:
                pts.append(x)
                ms.append(wx)
        ms = np.array(ms)
        return cls(np.array(pts), ms / ms.sum())

    @classmethod
    def dirac(cls, t: float) -> "StepMeasure":
        return cls(np.array([t]), np.array([1.0]))

    def translate(self, c: float) -> "StepMeasure":
        return StepMeasure(self.breakpoints + c, self.masses)

    def to_json(self) -> dict:
        return {"steps": [{"t": float(t), "mass": float(m)} for t, m in zip(self.breakpoints, self.masses)]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "StepMeasure":
        return cls(np.array([s["t"] for s in obj["steps"]]), np.array([s["mass"] for s in obj["steps"]]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t", "mass"])
        for t, m in zip(self.breakpoints, self.masses):
            wr.writerow([repr(float(t)), repr(float(m))])
        return buf.getvalue()


STEP_MOMENTS = ("mean", "positive-part-mean", "sup-support")


def step_moment(m: StepMeasure, kind: str) -> float:
    if kind == "mean":
        return float(np.dot(m.masses, m.breakpoints))
    if kind == "positive-part-mean":
        return float(np.dot(m.masses, np.maximum(m.breakpoints, 0.0)))
    if kind == "sup-support":
        return float(m.breakpoints[-1])
    raise ValueError(f"unknown moment kind {kind!r}; expected one of {STEP_MOMENTS}")


def wasserstein_line(a: StepMeasure, b: StepMeasure) -> float:
    """Order-1 transport distance between step measures on the real line."""
    grid = np.unique(np.concatenate([a.breakpoints, b.breakpoints]))
    if len(grid) < 2:
        return 0.0
    fa = _cdf(a.breakpoints, a.masses, grid[:-1])
    fb = _cdf(b.breakpoints, b.masses, grid[:-1])
    return float(np.sum(np.abs(fa - fb) * np.diff(grid)))


@dataclass(frozen=True)
class CircleDensity:
    """Fejer-smoothed density w.r.t. normalized Haar measure ``dtheta/2pi``."""

    degree: int
    moments: dict
    theta: np.ndarray
    density: np.ndarray

    @property
    def sup_deviation(self) -> float:
        return float(np.max(np.abs(self.density - 1.0)))

    def as_measure(self) -> EmpiricalMeasure:
        w = np.maximum(self.density, 0.0)
        return EmpiricalMeasure(np.exp(1j * self.theta), w / w.sum())

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "moments": {str(k): [float(np.real(c)), float(np.imag(c))] for k, c in sorted(self.moments.items())},
            "sup_deviation_from_uniform": self.sup_deviation,
            "min_density": float(self.density.min()),
        }


def moments_to_circle_density(moments, grid: int = 720, hermitian_tol: float = 1e-9) -> CircleDensity:
    """Reconstruct a circle density from Fourier moments ``c_k = int e^{ik theta}``.

    ``moments`` is a sequence ``c_0..c_D`` or a mapping ``{k: c_k}`` that may
    include negative ``k`` (checked for Hermitian symmetry).
    """
    if isinstance(moments, Mapping):
        mom = {int(k): complex(v) for k, v in moments.items()}
    else:
        mom = {k: complex(v) for k, v in enumerate(moments)}
    if 0 not in mom or abs(mom[0] - 1) > hermitian_tol:
        raise MeasureError("zeroth moment must equal 1")
    for k, c in list(mom.items()):
        if k < 0:
            if -k in mom and abs(mom[-k] - np.conj(c)) > hermitian_tol:
                raise MeasureError(f"moments are not Hermitian at k={-k}")
            mom.setdefault(-k, np.conj(c))
    pos = {k: c for k, c in mom.items() if k >= 0}
    D = max(pos)
    theta = 2 * np.pi * np.arange(grid) / grid
    dens = np.ones(grid)
    for k in range(1, D + 1):
        c = pos.get(k, 0.0)
        dens += 2 * (1 - k / (D + 1)) * np.real(c * np.exp(-1j * k * theta))
    return CircleDensity(D, pos, theta, dens)
