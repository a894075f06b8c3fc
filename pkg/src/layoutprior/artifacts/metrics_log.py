"""Append-only metrics log: protocol plus in-memory and JSON Lines implementations.

Each record is one JSON object per line. Records carry no wall-clock data
so two seeded serial runs write identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Protocol

from layoutprior.artifacts.canonical import canonicalise

__all__ = ["MetricsLogProtocol", "InMemoryMetricsLog", "JsonLinesMetricsLog"]


class MetricsLogProtocol(Protocol):
    """Minimal contract for an append-only metrics sink."""

    def append(self, record: dict[str, Any]) -> None: ...

    def records(self, split: str | None = None) -> list[dict[str, Any]]:
        """Records in append order, optionally filtered by split."""
        ...


# ── In-memory implementation (tests, library callers) ───


class InMemoryMetricsLog:
    def __init__(self) -> None:
        self._records: list[dict[str, Any]] = []

    def append(self, record: dict[str, Any]) -> None:
        # round-trip through JSON so callers cannot mutate what was logged
        self._records.append(json.loads(canonicalise(record)))

    def records(self, split: str | None = None) -> list[dict[str, Any]]:
        if split is None:
            return list(self._records)
        return [r for r in self._records if r.get("split") == split]


# ── JSON Lines file implementation ──────────────────────


class JsonLinesMetricsLog:
    """Appends canonical JSON lines to *path*; truncates on open unless ``append``."""

    def __init__(self, path: str | Path, *, append: bool = False) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not append:
            self.path.write_text("", encoding="utf-8")

    def append(self, record: dict[str, Any]) -> None:
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(canonicalise(record) + "\n")

    def records(self, split: str | None = None) -> list[dict[str, Any]]:
        if not self.path.exists():
            return []
        out = [
            json.loads(line)
            for line in self.path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        if split is not None:
            out = [r for r in out if r.get("split") == split]
        return out
