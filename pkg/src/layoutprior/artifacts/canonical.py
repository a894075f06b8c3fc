"""Canonical JSON for manifests, metric lines and exported tables."""

from __future__ import annotations

import json
from typing import Any

__all__ = ["canonicalise", "canonical_bytes"]


def canonicalise(payload: dict[str, Any], exclude_keys: set[str] | None = None) -> str:
    """Sorted keys, no whitespace, excluded keys removed.

    Floats keep Python's shortest round-trip repr, so equal values always
    produce equal text.
    """
    if exclude_keys:
        payload = {k: v for k, v in payload.items() if k not in exclude_keys}
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def canonical_bytes(payload: dict[str, Any], exclude_keys: set[str] | None = None) -> bytes:
    return canonicalise(payload, exclude_keys).encode("utf-8")
