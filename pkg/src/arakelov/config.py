"""Experiment configuration: a single versioned JSON document per run."""

from __future__ import annotations

import json
from enum import Enum
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import CapExceeded
from .heights import AdelicMetric, MetricTwist
from .polyalg import SEQUENCE_KINDS

SCHEMA_VERSION = 1

KINDS = ("heights", "orbit-measure", "equidist-verdict", "asymptotic-measure", "invariants-chain",
         "lattice-properties", "semigroup-harness")
STOCHASTIC_KINDS = ("lattice-properties", "semigroup-harness")

# documented caps; exceeding one is a run-time failure (exit 3), not a schema error
CAPS = {
    "horizon": 5000,
    "max_conductor": 2000,
    "n": 24,
    "capacity_n": 9,
    "samples": 1_000_000,
    "max_degree": 6,
    "cases": 10_000,
    "semigroup_N": 100_000,
    "count_n": 8,
}


class MetricBase(str, Enum):
    canonical = "canonical"
    fubini_study = "fubini-study"


class TwistTerm(BaseModel):
    model_config = ConfigDict(extra="forbid")
    i: int = Field(ge=0)
    j: int = Field(ge=0)
    k: int = Field(ge=0)
    a: float


class TwistSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    coeffs: list[TwistTerm] = []
    D: int | None = None

    def build(self) -> MetricTwist:
        return MetricTwist.from_json(self.model_dump())


class MetricSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    base: str = "canonical"
    twist: TwistSpec = TwistSpec()

    @field_validator("base")
    @classmethod
    def _known_base(cls, v: str) -> str:
        allowed = [b.value for b in MetricBase]
        if v not in allowed:
            raise ValueError(f"unknown metric base {v!r}: not a member of enum MetricBase {allowed}")
        return v

    def build(self) -> AdelicMetric:
        return AdelicMetric(self.base, self.twist.build())


class SequenceConfig(BaseModel):
    """``kind`` plus the generator parameters (``max_conductor``, ``values``, ``cycle``, ...)."""

    model_config = ConfigDict(extra="allow")
    kind: str

    @field_validator("kind")
    @classmethod
    def _known_kind(cls, v: str) -> str:
        if v not in SEQUENCE_KINDS:
            raise ValueError(f"unknown sequence kind {v!r}: expected one of {list(SEQUENCE_KINDS)}")
        return v

    def as_mapping(self) -> dict:
        return self.model_dump()

    @property
    def finite(self) -> bool:
        extra = self.model_extra or {}
        if self.kind in ("rational", "explicit"):
            return True
        return extra.get("max_conductor") is not None or extra.get("count") is not None


class SemigroupSpec(BaseModel):
    """An explicit harness case: ``f`` as lists of forms per term, optional ``g``."""

    model_config = ConfigDict(extra="forbid")
    f: list[list[list[int]]]
    g: list[list[list[int]]] | None = None
    constraints: list[tuple[list[int], int]] = []
    x: list[int]
    w: list[int]


class OutputSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    dir: str = "out"
    prefix: str = ""


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1]
    kind: Literal[KINDS]  # type: ignore[valid-type]
    metric: MetricSpec = MetricSpec()
    metrics: list[MetricSpec] | None = None
    sequence: SequenceConfig | None = None
    horizon: int | None = Field(default=None, ge=1)
    window: int = Field(default=25, ge=1)
    n_list: list[int] = [4, 8, 12, 16, 20, 24]
    tol: float = Field(default=1e-3, gt=0)
    seed: int | None = None
    precision: float = Field(default=1e-12, gt=0)
    method: Literal["auto", "radial", "exact", "reduction"] = "auto"
    max_degree: int = Field(default=3, ge=1)
    dictionary: list[TwistSpec] | None = None
    m_list: list[int] = [1, 2, 4, 8]
    force_limit_measure: bool = False
    capacity: bool = False
    capacity_n_list: list[int] = [2, 4, 6, 8]
    samples: int = Field(default=20000, ge=100)
    cases: int = Field(default=50, ge=1)
    count_n_max: int = Field(default=8, ge=0)
    evaluation_n: list[int] = [0, 4, 8, 12]
    semigroup: SemigroupSpec | None = None
    semigroup_N: int = Field(default=200, ge=2)
    output: OutputSpec = OutputSpec()

    @field_validator("n_list", "capacity_n_list")
    @classmethod
    def _increasing(cls, v: list[int]) -> list[int]:
        if not v or any(n < 1 for n in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("n_list must be a non-empty increasing list of positive integers")
        return v

    @field_validator("m_list")
    @classmethod
    def _positive_m(cls, v: list[int]) -> list[int]:
        if not v or any(m < 1 for m in v):
            raise ValueError("m_list must be a non-empty list of positive integers")
        return v

    @model_validator(mode="after")
    def _requirements(self) -> "ExperimentConfig":
        stochastic = self.kind in STOCHASTIC_KINDS or (self.kind == "asymptotic-measure" and self.capacity)
        if stochastic and self.seed is None:
            raise ValueError(f"field 'seed' is required for the stochastic experiment kind {self.kind!r}")
        if self.kind in ("heights", "orbit-measure", "equidist-verdict"):
            if self.sequence is None:
                raise ValueError(f"field 'sequence' is required for kind {self.kind!r}")
            if self.sequence.kind == "perturbed-torsion" and "seed" not in (self.sequence.model_extra or {}):
                raise ValueError("field 'sequence.seed' is required for the perturbed-torsion sequence")
            if not self.sequence.finite and self.horizon is None:
                raise ValueError("field 'horizon' is required for an unbounded sequence")
        if self.horizon is not None and self.horizon < self.window and self.kind == "equidist-verdict":
            raise ValueError("field 'horizon' must be at least 'window'")
        return self

    def check_caps(self) -> None:
        """Raise :class:`CapExceeded` when a knob is beyond its documented cap."""
        seq = (self.sequence.model_extra or {}) if self.sequence else {}
        checks = [
            ("horizon", self.horizon or 0, CAPS["horizon"]),
            ("sequence.max_conductor", int(seq.get("max_conductor") or 0), CAPS["max_conductor"]),
            ("max_degree", self.max_degree, CAPS["max_degree"]),
            ("samples", self.samples, CAPS["samples"]),
            ("cases", self.cases, CAPS["cases"]),
            ("semigroup_N", self.semigroup_N, CAPS["semigroup_N"]),
            ("evaluation_n", max(self.evaluation_n, default=0), CAPS["n"]),
            ("count_n_max", self.count_n_max, CAPS["count_n"]),
        ]
        if self.kind in ("asymptotic-measure", "invariants-chain"):
            checks.append(("n_list", self.n_list[-1], CAPS["n"]))
            if self.capacity:
                checks.append(("capacity_n_list", max(self.capacity_n_list), CAPS["capacity_n"]))
        for name, value, cap in checks:
            if value > cap:
                raise CapExceeded(f"{name} = {value} exceeds the cap {cap}")


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate; raises ``OSError``, ``json.JSONDecodeError`` or ``ValidationError``."""
    with open(path, encoding="utf-8") as fh:
        data: Any = json.load(fh)
    return ExperimentConfig.model_validate(data)


def schema_errors(path: str | Path) -> list[str]:
    """Human-readable list of problems; empty when the file validates."""
    try:
        load_config(path)
    except json.JSONDecodeError as e:
        return [f"invalid JSON: {e}"]
    except ValidationError as e:
        out = []
        for err in e.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            msg = err["msg"]
            if err["type"] == "missing":
                msg = f"field '{loc}' is required"
            out.append(f"{loc}: {msg}")
        return out
    return []
