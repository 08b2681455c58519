from __future__ import annotations

import json
import logging
import secrets
from pathlib import Path

from corechkc.config import settings
from corechkc.models.report import GenConfig, PropertyReport

logger = logging.getLogger(__name__)

_ALPHABET = "ABCDEFGHJKMNPQRSTUVWXYZ23456789"


class RunStore:
    """Fuzz runs on disk: ``<base_dir>/<id>/config.json`` and ``report.json``."""

    def __init__(self, base_dir: Path | None = None):
        self.base_dir = Path(base_dir or settings.runs_dir)
        self.base_dir.mkdir(parents=True, exist_ok=True)

    def _generate_short_id(self, length: int = 6) -> str:
        while True:
            run_id = "".join(secrets.choice(_ALPHABET) for _ in range(length))
            if not (self.base_dir / run_id).exists():
                return run_id

    def run_dir(self, run_id: str) -> Path:
        d = self.base_dir / run_id
        if not (d / "report.json").exists():
            raise ValueError(f"Run {run_id} not found")
        return d

    def save(self, report: PropertyReport, cfg: GenConfig) -> str:
        run_id = self._generate_short_id()
        d = self.base_dir / run_id
        d.mkdir(parents=True)
        self._write_json(d / "config.json", cfg.model_dump(mode="json"))
        self._write_json(d / "report.json", report.model_dump(mode="json"))
        logger.info("saved run %s (%d terms)", run_id, report.terms)
        return run_id

    def load(self, run_id: str) -> PropertyReport:
        path = self.run_dir(run_id) / "report.json"
        return PropertyReport(**json.loads(path.read_text(encoding="utf-8")))

    def load_config(self, run_id: str) -> GenConfig:
        path = self.run_dir(run_id) / "config.json"
        return GenConfig(**json.loads(path.read_text(encoding="utf-8")))

    def list_runs(self) -> list[str]:
        return sorted(p.parent.name for p in self.base_dir.glob("*/report.json"))

    def _write_json(self, path: Path, data: dict | list) -> None:
        path.write_text(json.dumps(data, indent=2, default=str), encoding="utf-8")
