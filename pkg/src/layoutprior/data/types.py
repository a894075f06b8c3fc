"""Domain types shared by the layout and reasoning stages."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

__all__ = [
    "BOX_EPS",
    "LabelVocab",
    "LabeledBox",
    "Scene",
    "QAStyle",
    "MCQuestion",
]

# Tolerance on x + w <= 1 and y + h <= 1 after clamping
BOX_EPS = 1e-6


@dataclass(frozen=True)
class LabelVocab:
    """Ordered category names; index C is reserved for the end-of-layout class."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.names)) != len(self.names):
            dupes = sorted({n for n in self.names if self.names.count(n) > 1})
            raise ValueError(f"duplicate category names: {dupes}")
        if not self.names:
            raise ValueError("label vocab must contain at least one category")

    @property
    def num_classes(self) -> int:
        """C, the number of real categories."""
        return len(self.names)

    @property
    def end_index(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def __contains__(self, name: object) -> bool:
        return name in self.names

    def name(self, index: int) -> str:
        if index == self.end_index:
            return "<end>"
        return self.names[index]

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.names).encode("utf-8")).hexdigest()

    @classmethod
    def from_file(cls, path: str | Path) -> LabelVocab:
        """One category name per line; line number is the index."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(tuple(line.strip() for line in lines if line.strip()))

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text("".join(f"{n}\n" for n in self.names), encoding="utf-8")


@dataclass(frozen=True)
class LabeledBox:
    """One object: label index plus normalized top-left (x, y) and extent (w, h)."""

    label: int
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.label < 0:
            raise ValueError(f"label must be non-negative, got {self.label}")
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ValueError(f"box corner out of [0,1]: ({self.x}, {self.y})")
        if self.w <= 0.0 or self.h <= 0.0:
            raise ValueError(f"box extent must be positive: ({self.w}, {self.h})")
        if self.x + self.w > 1.0 + BOX_EPS or self.y + self.h > 1.0 + BOX_EPS:
            raise ValueError(f"box exceeds canvas: {self.coords}")

    @property
    def coords(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2, self.y + self.h / 2)

    @classmethod
    def clamped(cls, label: int, x: float, y: float, w: float, h: float) -> LabeledBox:
        """Crop a raw box to the unit canvas, keeping a positive extent."""
        if 0.0 <= x and 0.0 <= y and w > 0.0 and h > 0.0 and x + w <= 1.0 and y + h <= 1.0:
            return cls(label=label, x=x, y=y, w=w, h=h)
        x0, x1 = min(max(x, 0.0), 1.0), min(max(x + w, 0.0), 1.0)
        y0, y1 = min(max(y, 0.0), 1.0), min(max(y + h, 0.0), 1.0)
        w = max(x1 - x0, BOX_EPS)
        h = max(y1 - y0, BOX_EPS)
        return cls(label=label, x=min(x0, 1.0 - w), y=min(y0, 1.0 - h), w=w, h=h)


@dataclass(frozen=True)
class Scene:
    """A caption paired with its ordered labeled boxes."""

    id: str
    caption: str
    boxes: tuple[LabeledBox, ...] = field(default_factory=tuple)

    @property
    def labels(self) -> list[int]:
        return [b.label for b in self.boxes]


class QAStyle(StrEnum):
    CSQA = "csqa"
    WINOGRANDE = "winogrande"


@dataclass(frozen=True)
class MCQuestion:
    """A stem with n candidate answers; gold is None for unlabeled test splits."""

    id: str
    stem: str
    choices: tuple[str, ...]
    gold: int | None
    style: QAStyle

    def __post_init__(self) -> None:
        if len(self.choices) < 2:
            raise ValueError(f"question {self.id} needs at least 2 choices")
        if self.gold is not None and not 0 <= self.gold < len(self.choices):
            raise ValueError(f"question {self.id}: gold {self.gold} out of range")
        if self.style is QAStyle.WINOGRANDE and self.stem.count("_") != 1:
            raise ValueError(f"question {self.id}: winogrande stem needs exactly one '_'")

    @property
    def num_choices(self) -> int:
        return len(self.choices)
