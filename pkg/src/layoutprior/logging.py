"""Structured logging configuration with a per-command run_id."""

from __future__ import annotations

import logging as stdlib_logging
import sys
import uuid
from contextvars import ContextVar
from typing import Any

import structlog

__all__ = [
    "configure_logging",
    "get_logger",
    "run_id_var",
    "new_run_id",
]

# Context variable for command-scoped correlation
run_id_var: ContextVar[str] = ContextVar("run_id", default="")


def new_run_id() -> str:
    """Generate and set a new run ID for the current context."""
    rid = str(uuid.uuid4())
    run_id_var.set(rid)
    return rid


def _add_run_id(logger: Any, method_name: str, event_dict: dict[str, Any]) -> dict[str, Any]:
    """Inject run_id into every log entry."""
    rid = run_id_var.get("")
    if rid:
        event_dict["run_id"] = rid
    return event_dict


def _stderr_logger(*args: Any) -> structlog.PrintLogger:
    # stdout is reserved for command summaries; sys.stderr is looked up per logger
    return structlog.PrintLogger(sys.stderr)


def configure_logging(*, json_output: bool = True, level: str = "INFO") -> None:
    """Configure structlog for the CLI and library code.

    Args:
        json_output: True for JSON lines, False for console rendering.
        level: Log level string.
    """
    processors: list[Any] = [
        structlog.contextvars.merge_contextvars,
        _add_run_id,
        structlog.processors.add_log_level,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
    ]

    if json_output:
        processors.append(structlog.processors.format_exc_info)
        processors.append(structlog.processors.JSONRenderer())
    else:
        processors.append(structlog.dev.ConsoleRenderer())

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.make_filtering_bound_logger(
            stdlib_logging.getLevelNamesMapping().get(level.upper(), stdlib_logging.INFO)
        ),
        context_class=dict,
        logger_factory=_stderr_logger,
        cache_logger_on_first_use=False,
    )


def get_logger(**kwargs: Any) -> structlog.BoundLogger:
    """Get a bound logger with optional initial context."""
    return structlog.get_logger(**kwargs)  # type: ignore[no-any-return]
