"""Shared fixtures for contract tests.

Contract tests validate that the files and payloads this package writes
conform to the JSON Schemas under ``specs/contracts/``. A missing schema is
a hard failure: the schemas ship with the repository.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pytest

_REPO_ROOT = Path(__file__).resolve().parents[2]
_LOCAL_SPECS = _REPO_ROOT / "specs" / "contracts"


def load_schema(name: str) -> dict[str, Any]:
    candidate = _LOCAL_SPECS / name
    if not candidate.is_file():
        raise FileNotFoundError(f"Schema '{name}' not found in {_LOCAL_SPECS}")
    return json.loads(candidate.read_text(encoding="utf-8"))  # type: ignore[no-any-return]


# ── Fixtures ─────────────────────────────────────────────────────


@pytest.fixture()
def error_schema() -> dict[str, Any]:
    return load_schema("error.schema.json")


@pytest.fixture()
def scene_record_schema() -> dict[str, Any]:
    return load_schema("scene_record.schema.json")


@pytest.fixture()
def metrics_line_schema() -> dict[str, Any]:
    return load_schema("metrics_line.schema.json")


@pytest.fixture()
def prediction_schema() -> dict[str, Any]:
    return load_schema("prediction.schema.json")


@pytest.fixture()
def ablation_table_schema() -> dict[str, Any]:
    return load_schema("ablation_table.schema.json")


@pytest.fixture()
def checkpoint_manifest_schema() -> dict[str, Any]:
    return load_schema("checkpoint_manifest.schema.json")
