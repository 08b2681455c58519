from __future__ import annotations

import json
from enum import Enum
from pathlib import Path

from pydantic import BaseModel, Field, field_validator, model_validator

TERMINAL_RULES = ("T-Const", "T-Var")

DEFAULT_WEIGHTS: dict[str, float] = {
    "T-Const": 1.0,
    "T-Var": 1.0,
    "T-Let": 1.0,
    "T-LetStr": 1.0,
    "T-Cast": 0.5,
    "T-DynCast": 0.5,
    "T-Fun": 0.5,
    "T-Str": 1.0,
    "T-Def": 1.0,
    "T-DefArr": 1.0,
    "T-Ind": 1.0,
    "T-Assign": 1.0,
    "T-AssignArr": 1.0,
    "T-IndAssign": 1.0,
    "T-If": 1.0,
    "T-IfNT": 1.0,
    "T-Struct": 0.5,
    "T-Mac": 1.0,
    "T-Add": 1.0,
    "G-ASTR": 1.5,
}

PROPERTY_NAMES = (
    "generator",
    "progress",
    "blame",
    "preservation",
    "simulation",
    "error-kind",
    "ill-typed-rejection",
)


class GenMode(str, Enum):
    WELL_TYPED = "well-typed"
    NEAR_ILL_TYPED = "near-ill-typed"


class GenConfig(BaseModel):
    seed: int = 0
    depth: int = Field(default=9, ge=1)  # generation fuel
    step_fuel: int = Field(default=10000, ge=1)  # evaluation fuel
    weights: dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    count: int = Field(default=20000, ge=0)
    mode: GenMode = GenMode.WELL_TYPED
    unchecked_rate: float = Field(default=0.1, ge=0.0, le=1.0)
    retries: int = Field(default=50, ge=1)
    workers: int = Field(default=8, ge=1)

    @field_validator("weights")
    @classmethod
    def _weights_known_and_nonnegative(cls, value: dict[str, float]) -> dict[str, float]:
        unknown = sorted(set(value) - set(DEFAULT_WEIGHTS))
        if unknown:
            raise ValueError(f"unknown generation rule(s): {', '.join(unknown)}")
        negative = sorted(name for name, w in value.items() if w < 0)
        if negative:
            raise ValueError(f"negative weight for: {', '.join(negative)}")
        return {**DEFAULT_WEIGHTS, **value}

    @model_validator(mode="after")
    def _terminal_rule_enabled(self) -> GenConfig:
        if not any(self.weights.get(rule, 0.0) > 0 for rule in TERMINAL_RULES):
            raise ValueError("at least one terminal rule (T-Const, T-Var) needs a positive weight")
        return self

    @classmethod
    def from_weights_file(cls, path: Path, **overrides) -> GenConfig:
        """Load a JSON object of rule name to weight; unspecified rules keep their default."""
        weights = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(weights, dict):
            raise ValueError(f"{path}: expected a JSON object of rule weights")
        return cls(weights=weights, **overrides)


class Counterexample(BaseModel):
    prop: str
    seed: int
    program: str
    step: int | None = None
    trace: list[str] = Field(default_factory=list)
    detail: str = ""


class PropertyTally(BaseModel):
    passed: int = 0
    failed: int = 0
    inconclusive: int = 0

    def __add__(self, other: PropertyTally) -> PropertyTally:
        return PropertyTally(
            passed=self.passed + other.passed,
            failed=self.failed + other.failed,
            inconclusive=self.inconclusive + other.inconclusive,
        )


class PropertyReport(BaseModel):
    terms: int = 0
    tallies: dict[str, PropertyTally] = Field(
        default_factory=lambda: {name: PropertyTally() for name in PROPERTY_NAMES}
    )
    counterexamples: list[Counterexample] = Field(default_factory=list)
    coverage: dict[str, int] = Field(default_factory=dict)
    consistency_flags: list[str] = Field(default_factory=list)
    if_nt_taken: int = 0
    if_nt_total: int = 0

    def record(self, prop: str, result: bool | None) -> None:
        """Tally one check; None counts as inconclusive."""
        tally = self.tallies.setdefault(prop, PropertyTally())
        if result is None:
            tally.inconclusive += 1
        elif result:
            tally.passed += 1
        else:
            tally.failed += 1

    def merge(self, other: PropertyReport) -> PropertyReport:
        names = list(PROPERTY_NAMES) + sorted(
            (set(self.tallies) | set(other.tallies)) - set(PROPERTY_NAMES)
        )
        tallies = {
            name: self.tallies.get(name, PropertyTally()) + other.tallies.get(name, PropertyTally())
            for name in names
        }
        coverage = dict(self.coverage)
        for rule, n in other.coverage.items():
            coverage[rule] = coverage.get(rule, 0) + n
        return PropertyReport(
            terms=self.terms + other.terms,
            tallies=tallies,
            counterexamples=sorted(
                self.counterexamples + other.counterexamples, key=lambda c: (c.seed, c.prop)
            ),
            coverage=dict(sorted(coverage.items())),
            consistency_flags=sorted(self.consistency_flags + other.consistency_flags),
            if_nt_taken=self.if_nt_taken + other.if_nt_taken,
            if_nt_total=self.if_nt_total + other.if_nt_total,
        )

    @property
    def failed(self) -> bool:
        return any(t.failed for t in self.tallies.values())

    def to_text(self) -> str:
        lines = [f"TERMS {self.terms}"]
        for name, t in self.tallies.items():
            lines.append(
                f"PROP {name} PASS {t.passed} FAIL {t.failed} INCONCLUSIVE {t.inconclusive}"
            )
        if self.coverage:
            lines.append(
                "COVERAGE " + " ".join(f"{rule}={n}" for rule, n in sorted(self.coverage.items()))
            )
        lines.append(f"IFNT taken={self.if_nt_taken} total={self.if_nt_total}")
        lines.extend(f"FLAG {flag}" for flag in self.consistency_flags)
        for cex in self.counterexamples:
            lines.append(f"CEX seed={cex.seed} program={cex.program}")
            lines.append(f"  prop {cex.prop}")
            if cex.step is not None:
                lines.append(f"  step {cex.step}")
            if cex.detail:
                lines.append(f"  detail {cex.detail}")
            lines.extend(f"  {line}" for line in cex.trace)
        return "\n".join(lines) + "\n"
