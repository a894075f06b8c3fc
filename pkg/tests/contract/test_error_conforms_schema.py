"""Contract tests: CLI error payloads must conform to the local error schema."""

from __future__ import annotations

import json
from collections.abc import Iterator
from pathlib import Path
from typing import Any

import jsonschema
import pytest
import torch

from layoutprior.cli import main
from layoutprior.errors import (
    ArtifactWriteError,
    ConfigMismatchError,
    DataFormatError,
    LayoutPriorError,
    TrainingDivergedError,
    UnknownLabelError,
    error_payload,
)


@pytest.fixture()
def _torch_state() -> Iterator[None]:
    threads = torch.get_num_threads()
    deterministic = torch.are_deterministic_algorithms_enabled()
    yield
    torch.set_num_threads(threads)
    torch.use_deterministic_algorithms(deterministic)


def _subclasses(cls: type[LayoutPriorError]) -> set[type[LayoutPriorError]]:
    out: set[type[LayoutPriorError]] = set()
    for sub in cls.__subclasses__():
        out |= {sub, *_subclasses(sub)}
    return out


def _stderr_payload(capsys: pytest.CaptureFixture[str], argv: list[str]) -> dict[str, Any]:
    main(argv)
    last = capsys.readouterr().err.strip().splitlines()[-1]
    return json.loads(last)  # type: ignore[no-any-return]


def test_schema_lists_every_error_code(error_schema: dict[str, Any]) -> None:
    codes = {cls.error_code for cls in _subclasses(LayoutPriorError)} | {"INTERNAL_ERROR"}
    assert codes == set(error_schema["properties"]["error_code"]["enum"])


@pytest.mark.parametrize(
    "exc",
    [
        DataFormatError("bad record", path="s.jsonl", line=4),
        UnknownLabelError("zebra", line=2),
        ConfigMismatchError("hidden differs", differences={"hidden": [16, 32]}),
        ArtifactWriteError("cannot write", path="/x"),
        TrainingDivergedError("nan", epoch=3, batch_start=16),
        LayoutPriorError("boom"),
    ],
)
def test_payload_conforms(exc: LayoutPriorError, error_schema: dict[str, Any]) -> None:
    jsonschema.validate(instance=error_payload(exc), schema=error_schema)


def test_usage_error_conforms(
    capsys: pytest.CaptureFixture[str], error_schema: dict[str, Any]
) -> None:
    payload = _stderr_payload(capsys, ["train-layout"])
    assert payload["error_code"] == "USAGE"
    jsonschema.validate(instance=payload, schema=error_schema)


@pytest.mark.usefixtures("_torch_state")
def test_input_not_found_conforms(
    capsys: pytest.CaptureFixture[str], tmp_path: Path, error_schema: dict[str, Any]
) -> None:
    payload = _stderr_payload(
        capsys, ["eval-qa", "--checkpoint", str(tmp_path / "missing.ckpt")]
    )
    assert payload["error_code"] == "INPUT_NOT_FOUND"
    jsonschema.validate(instance=payload, schema=error_schema)


@pytest.mark.usefixtures("_torch_state")
def test_checkpoint_error_conforms(
    capsys: pytest.CaptureFixture[str], tmp_path: Path, error_schema: dict[str, Any]
) -> None:
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"PK\x03\x04 truncated")
    payload = _stderr_payload(capsys, ["render", "--checkpoint", str(bad), "--text", "a cat"])
    assert payload["exit_code"] == 2
    jsonschema.validate(instance=payload, schema=error_schema)
