"""Tests for generation settings and property reports."""

from __future__ import annotations

import json

import pytest
from pydantic import ValidationError

from corechkc.models.report import (
    DEFAULT_WEIGHTS,
    PROPERTY_NAMES,
    Counterexample,
    GenConfig,
    GenMode,
    PropertyReport,
)


def _make_report(seed: int, passed: bool = True) -> PropertyReport:
    report = PropertyReport(terms=1)
    report.record("progress", passed)
    report.coverage["T-Let"] = 2
    if not passed:
        report.counterexamples.append(
            Counterexample(prop="progress", seed=seed, program="(defs (main (lit 0 int)))")
        )
    return report


# ---------------------------------------------------------------------------
# TestGenConfig
# ---------------------------------------------------------------------------


class TestGenConfig:
    def test_defaults(self):
        cfg = GenConfig()
        assert cfg.depth == 9
        assert cfg.count == 20000
        assert cfg.mode is GenMode.WELL_TYPED
        assert cfg.weights == DEFAULT_WEIGHTS

    def test_partial_weights_keep_other_defaults(self):
        cfg = GenConfig(weights={"T-If": 3.0})
        assert cfg.weights["T-If"] == 3.0
        assert cfg.weights["T-Let"] == DEFAULT_WEIGHTS["T-Let"]

    def test_unknown_rule_rejected(self):
        with pytest.raises(ValidationError, match="unknown generation rule"):
            GenConfig(weights={"T-Loop": 1.0})

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError, match="negative weight"):
            GenConfig(weights={"T-If": -1.0})

    def test_terminal_rule_required(self):
        with pytest.raises(ValidationError, match="terminal rule"):
            GenConfig(weights={"T-Const": 0.0, "T-Var": 0.0})

    def test_weights_file(self, tmp_path):
        path = tmp_path / "weights.json"
        path.write_text(json.dumps({"T-Add": 0.0}), encoding="utf-8")
        cfg = GenConfig.from_weights_file(path, seed=4)
        assert cfg.weights["T-Add"] == 0.0
        assert cfg.seed == 4

    def test_weights_file_must_hold_an_object(self, tmp_path):
        path = tmp_path / "weights.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ValueError, match="JSON object"):
            GenConfig.from_weights_file(path)


# ---------------------------------------------------------------------------
# TestPropertyReport
# ---------------------------------------------------------------------------


class TestPropertyReport:
    def test_every_property_starts_at_zero(self):
        report = PropertyReport()
        assert list(report.tallies) == list(PROPERTY_NAMES)
        assert not report.failed

    def test_record_inconclusive(self):
        report = PropertyReport()
        report.record("simulation", None)
        assert report.tallies["simulation"].inconclusive == 1
        assert not report.failed

    def test_merge_sums_and_orders_counterexamples(self):
        merged = _make_report(9, passed=False).merge(_make_report(2, passed=False))
        assert merged.terms == 2
        assert merged.tallies["progress"].failed == 2
        assert merged.coverage == {"T-Let": 4}
        assert [c.seed for c in merged.counterexamples] == [2, 9]
        assert merged.failed

    def test_text_layout(self):
        report = _make_report(1, passed=False)
        report.consistency_flags.append("seed=1 G-ASTR off-by-one accepted, eval bounds")
        lines = report.to_text().splitlines()
        assert lines[0] == "TERMS 1"
        assert "PROP progress PASS 0 FAIL 1 INCONCLUSIVE 0" in lines
        assert "COVERAGE T-Let=2" in lines
        assert "IFNT taken=0 total=0" in lines
        assert "FLAG seed=1 G-ASTR off-by-one accepted, eval bounds" in lines
        assert "CEX seed=1 program=(defs (main (lit 0 int)))" in lines
        assert "  prop progress" in lines

    def test_json_round_trip(self):
        report = _make_report(3, passed=False)
        again = PropertyReport(**json.loads(report.model_dump_json()))
        assert again == report
