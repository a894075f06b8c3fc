"""Error hierarchy with stable machine-readable codes.

Every error raised across a command boundary carries an ``error_code``
(see ``specs/contracts/error.schema.json``) and the process exit code the CLI
maps it to: 1 for validation failures, 2 for runtime failures.
"""

from __future__ import annotations

from typing import Any, ClassVar

__all__ = [
    "LayoutPriorError",
    "ValidationFailure",
    "RuntimeFailure",
    "DataFormatError",
    "UnknownLabelError",
    "UsageError",
    "InputNotFoundError",
    "ConfigError",
    "ConfigMismatchError",
    "VocabMismatchError",
    "CheckpointError",
    "ArtifactWriteError",
    "TrainingDivergedError",
    "FrozenEncoderTouchedError",
    "ParameterParityError",
    "GradientCheckError",
    "error_payload",
]


class LayoutPriorError(Exception):
    """Base class; subclasses pin ``error_code`` and ``exit_code``."""

    error_code: ClassVar[str] = "INTERNAL_ERROR"
    exit_code: ClassVar[int] = 2

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details = details


# ── Validation (exit 1) ────────────────────────────────────────────


class ValidationFailure(LayoutPriorError):
    error_code = "INVALID_INPUT"
    exit_code = 1


class DataFormatError(ValidationFailure):
    """A dataset record does not match its schema."""

    error_code = "DATA_FORMAT"

    def __init__(self, message: str, *, path: str = "", line: int | None = None) -> None:
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}" if where else message, path=path, line=line)
        self.line = line


class UnknownLabelError(ValidationFailure):
    error_code = "UNKNOWN_LABEL"

    def __init__(self, label: str, *, line: int | None = None) -> None:
        suffix = f" (line {line})" if line is not None else ""
        super().__init__(f"unknown label {label!r}{suffix}", label=label, line=line)
        self.label = label


class UsageError(ValidationFailure):
    """Unknown flag, missing argument or bad subcommand."""

    error_code = "USAGE"


class InputNotFoundError(ValidationFailure):
    error_code = "INPUT_NOT_FOUND"


class ConfigError(ValidationFailure):
    error_code = "CONFIG_INVALID"


class ConfigMismatchError(ValidationFailure):
    """A checkpoint was built with a different encoder config than the run."""

    error_code = "CONFIG_MISMATCH"


class VocabMismatchError(ValidationFailure):
    error_code = "VOCAB_MISMATCH"


# ── Runtime (exit 2) ───────────────────────────────────────────────


class RuntimeFailure(LayoutPriorError):
    error_code = "RUNTIME_FAILURE"
    exit_code = 2


class CheckpointError(RuntimeFailure):
    error_code = "CHECKPOINT_INVALID"


class ArtifactWriteError(RuntimeFailure):
    """An output file (render, export, log) could not be written."""

    error_code = "ARTIFACT_WRITE"


class TrainingDivergedError(RuntimeFailure):
    error_code = "TRAINING_DIVERGED"


class FrozenEncoderTouchedError(RuntimeFailure):
    error_code = "FROZEN_ENCODER_TOUCHED"


class ParameterParityError(RuntimeFailure):
    error_code = "PARAMETER_PARITY"


class GradientCheckError(RuntimeFailure):
    """Analytic and numeric gradients disagree beyond tolerance."""

    error_code = "GRADIENT_CHECK_FAILED"


def error_payload(exc: LayoutPriorError) -> dict[str, Any]:
    """Machine-readable payload for the CLI's stderr report."""
    payload: dict[str, Any] = {
        "error_code": exc.error_code,
        "message": exc.message,
        "exit_code": exc.exit_code,
    }
    details = {k: v for k, v in exc.details.items() if v is not None}
    if details:
        payload["details"] = details
    return payload
