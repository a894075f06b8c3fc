"""Multiple-choice QA loaders (CommonsenseQA and WinoGrande JSON Lines)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import TYPE_CHECKING, Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from layoutprior.data.types import MCQuestion, QAStyle
from layoutprior.errors import DataFormatError

if TYPE_CHECKING:
    from collections.abc import Iterable

__all__ = [
    "WINOGRANDE_TRAIN_SIZES",
    "WinoGrandeSize",
    "load_mcqa",
    "write_csqa",
    "winogrande_train_file",
]

WinoGrandeSize = Literal["xs", "s", "m", "l", "xl"]

# Training-set sizes shipped with WinoGrande (train_{xs,s,m,l,xl}.jsonl)
WINOGRANDE_TRAIN_SIZES: dict[str, int] = {
    "xs": 160,
    "s": 640,
    "m": 2558,
    "l": 10234,
    "xl": 40398,
}


class _CSQAChoice(BaseModel):
    model_config = ConfigDict(extra="ignore")

    label: str = Field(min_length=1)
    text: str


class _CSQAQuestion(BaseModel):
    model_config = ConfigDict(extra="ignore")

    stem: str
    choices: list[_CSQAChoice] = Field(min_length=2)


class CSQARecord(BaseModel):
    model_config = ConfigDict(extra="ignore")

    id: str
    question: _CSQAQuestion
    answerKey: str | None = None  # noqa: N815


class WinoGrandeRecord(BaseModel):
    model_config = ConfigDict(extra="ignore")

    qID: str | None = None  # noqa: N815
    sentence: str
    option1: str
    option2: str
    answer: str | None = None


def _csqa_question(record: CSQARecord, path: Path, lineno: int) -> MCQuestion:
    labels = [c.label for c in record.question.choices]
    gold: int | None = None
    if record.answerKey:
        if record.answerKey not in labels:
            raise DataFormatError(
                f"answerKey {record.answerKey!r} not among choices {labels}",
                path=str(path),
                line=lineno,
            )
        gold = labels.index(record.answerKey)
    return MCQuestion(
        id=record.id,
        stem=record.question.stem,
        choices=tuple(c.text for c in record.question.choices),
        gold=gold,
        style=QAStyle.CSQA,
    )


def _winogrande_question(record: WinoGrandeRecord, path: Path, lineno: int) -> MCQuestion:
    if record.sentence.count("_") != 1:
        raise DataFormatError(
            "winogrande sentence must contain exactly one '_' blank",
            path=str(path),
            line=lineno,
        )
    gold: int | None = None
    if record.answer:
        if record.answer not in ("1", "2"):
            raise DataFormatError(
                f"winogrande answer must be '1' or '2', got {record.answer!r}",
                path=str(path),
                line=lineno,
            )
        gold = int(record.answer) - 1
    return MCQuestion(
        id=record.qID or f"{path.stem}-{lineno}",
        stem=record.sentence,
        choices=(record.option1, record.option2),
        gold=gold,
        style=QAStyle.WINOGRANDE,
    )


def load_mcqa(path: str | Path, style: QAStyle | str) -> list[MCQuestion]:
    """Normalize a CSQA or WinoGrande JSON-Lines file into MCQuestion records."""
    path = Path(path)
    style = QAStyle(style)
    questions: list[MCQuestion] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                if style is QAStyle.CSQA:
                    questions.append(
                        _csqa_question(CSQARecord.model_validate_json(line), path, lineno)
                    )
                else:
                    questions.append(
                        _winogrande_question(
                            WinoGrandeRecord.model_validate_json(line), path, lineno
                        )
                    )
            except ValidationError as exc:
                raise DataFormatError(
                    f"malformed {style.value} record: {exc.errors()[0]['msg']}",
                    path=str(path),
                    line=lineno,
                ) from exc
    return questions


def write_csqa(questions: Iterable[MCQuestion], path: str | Path) -> int:
    """Write questions in the CSQA JSON-Lines schema (choice labels A, B, ...)."""
    count = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for q in questions:
            labels = [chr(ord("A") + i) for i in range(q.num_choices)]
            record: dict[str, Any] = {
                "id": q.id,
                "question": {
                    "stem": q.stem,
                    "choices": [
                        {"label": lab, "text": text}
                        for lab, text in zip(labels, q.choices, strict=True)
                    ],
                },
            }
            if q.gold is not None:
                record["answerKey"] = labels[q.gold]
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            count += 1
    return count


def winogrande_train_file(root: str | Path, size: str) -> Path:
    """Path of the WinoGrande training file for a named size (xs..xl)."""
    key = size.lower()
    if key not in WINOGRANDE_TRAIN_SIZES:
        expected = list(WINOGRANDE_TRAIN_SIZES)
        raise ValueError(f"unknown winogrande size {size!r}; expected {expected}")
    return Path(root) / f"train_{key}.jsonl"
