"""Tests for the on-disk run store."""

from __future__ import annotations

import pytest

from corechkc.models.report import GenConfig, PropertyReport
from corechkc.store import RunStore


def _make_report(terms: int = 3) -> PropertyReport:
    report = PropertyReport(terms=terms)
    for _ in range(terms):
        report.record("generator", True)
    return report


class TestRunStore:
    def test_save_and_load(self, tmp_path):
        store = RunStore(tmp_path)
        cfg = GenConfig(seed=7, count=3, workers=1)
        run_id = store.save(_make_report(), cfg)
        assert len(run_id) == 6
        assert (tmp_path / run_id / "report.json").exists()
        assert store.load(run_id) == _make_report()
        assert store.load_config(run_id) == cfg

    def test_list_runs_sorted(self, tmp_path):
        store = RunStore(tmp_path)
        ids = [store.save(_make_report(n), GenConfig(count=n)) for n in (1, 2, 3)]
        assert store.list_runs() == sorted(ids)

    def test_ids_are_unique(self, tmp_path):
        store = RunStore(tmp_path)
        ids = {store.save(_make_report(), GenConfig()) for _ in range(10)}
        assert len(ids) == 10

    def test_missing_run(self, tmp_path):
        store = RunStore(tmp_path)
        with pytest.raises(ValueError, match="Run NOPE42 not found"):
            store.load("NOPE42")

    def test_directory_without_report_is_ignored(self, tmp_path):
        (tmp_path / "PARTIAL").mkdir()
        store = RunStore(tmp_path)
        assert store.list_runs() == []

    def test_creates_base_dir(self, tmp_path):
        base = tmp_path / "nested" / "runs"
        RunStore(base)
        assert base.is_dir()
