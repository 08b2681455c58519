"""Tests for the project manifest."""

from __future__ import annotations

import tomllib
from pathlib import Path

MANIFEST = Path(__file__).parent.parent / "pyproject.toml"
PACKAGE_DIR = Path(__file__).parent.parent / "corechkc"


def _names(requirements: list[str]) -> set[str]:
    return {req.split(">")[0].split("[")[0].split("=")[0].strip() for req in requirements}


# ---------------------------------------------------------------------------
# TestDependencies
# ---------------------------------------------------------------------------


class TestDependencies:
    def test_test_client_is_a_dev_dependency(self):
        project = tomllib.loads(MANIFEST.read_text(encoding="utf-8"))["project"]
        assert "httpx" not in _names(project["dependencies"])
        assert "httpx" in _names(project["optional-dependencies"]["dev"])

    def test_package_does_not_import_test_client(self):
        for path in PACKAGE_DIR.rglob("*.py"):
            text = path.read_text(encoding="utf-8")
            assert "import httpx" not in text, path
            assert "from httpx" not in text, path
