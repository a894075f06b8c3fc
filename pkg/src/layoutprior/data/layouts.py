"""Scene-layout files: parsing, small-object filtering and canonical ordering."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from layoutprior.data.types import LabeledBox, LabelVocab, Scene
from layoutprior.errors import DataFormatError, UnknownLabelError

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator, Sequence

__all__ = [
    "ObjectRecord",
    "SceneRecord",
    "Rejection",
    "load_layout_dataset",
    "read_scene_records",
    "write_scenes",
    "scene_to_record",
    "derive_label_vocab",
    "filter_and_normalize",
    "canonical_key",
    "canonical_order",
    "is_canonical",
]


class ObjectRecord(BaseModel):
    """One annotated object in pixel (or already-normalized) coordinates."""

    model_config = ConfigDict(extra="forbid")

    label: str = Field(min_length=1)
    x: float
    y: float
    w: float = Field(gt=0)
    h: float = Field(gt=0)


class SceneRecord(BaseModel):
    """One JSON-Lines scene; carries a single caption or a list of captions."""

    model_config = ConfigDict(extra="forbid")

    id: str = Field(min_length=1)
    caption: str | None = None
    captions: list[str] | None = None
    width: int = Field(gt=0)
    height: int = Field(gt=0)
    objects: list[ObjectRecord] = []

    @model_validator(mode="after")
    def _one_caption_field(self) -> SceneRecord:
        if (self.caption is None) == (self.captions is None):
            raise ValueError("exactly one of 'caption' or 'captions' is required")
        if self.captions is not None and not self.captions:
            raise ValueError("'captions' must not be empty")
        return self

    def all_captions(self) -> list[str]:
        if self.caption is not None:
            return [self.caption]
        return list(self.captions or [])


@dataclass(frozen=True)
class Rejection:
    """A scene dropped by filter_and_normalize; a normal outcome, not an error."""

    scene_id: str
    reason: Literal["no_boxes", "too_many_objects"]
    box_count: int


def _iter_scene_records(path: Path) -> Iterator[tuple[int, SceneRecord]]:
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = SceneRecord.model_validate_json(line)
            except ValidationError as exc:
                raise DataFormatError(
                    f"malformed scene record: {exc.errors()[0]['msg']}",
                    path=str(path),
                    line=lineno,
                ) from exc
            yield lineno, record


def read_scene_records(path: str | Path) -> list[SceneRecord]:
    """Parse a scene JSON-Lines file; blank lines are skipped."""
    return [record for _, record in _iter_scene_records(Path(path))]


def _record_boxes(record: SceneRecord, vocab: LabelVocab, lineno: int) -> tuple[LabeledBox, ...]:
    boxes: list[LabeledBox] = []
    for obj in record.objects:
        if obj.label not in vocab:
            raise UnknownLabelError(obj.label, line=lineno)
        boxes.append(
            LabeledBox.clamped(
                vocab.index(obj.label),
                obj.x / record.width,
                obj.y / record.height,
                obj.w / record.width,
                obj.h / record.height,
            )
        )
    return tuple(boxes)


def load_layout_dataset(path: str | Path, vocab: LabelVocab) -> list[Scene]:
    """Load scenes, one per (image, caption) pair, normalized to the unit canvas."""
    scenes: list[Scene] = []
    for lineno, record in _iter_scene_records(Path(path)):
        boxes = _record_boxes(record, vocab, lineno)
        captions = record.all_captions()
        for k, caption in enumerate(captions):
            scene_id = record.id if record.caption is not None else f"{record.id}#{k}"
            scenes.append(Scene(id=scene_id, caption=caption, boxes=boxes))
    return scenes


def scene_to_record(scene: Scene, vocab: LabelVocab) -> dict[str, object]:
    """Normalized record (width = height = 1) for a Scene."""
    return {
        "id": scene.id,
        "caption": scene.caption,
        "width": 1,
        "height": 1,
        "objects": [
            {"label": vocab.name(b.label), "x": b.x, "y": b.y, "w": b.w, "h": b.h}
            for b in scene.boxes
        ],
    }


def write_scenes(scenes: Iterable[Scene], vocab: LabelVocab, path: str | Path) -> int:
    """Write normalized scene records; returns the count written."""
    count = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for scene in scenes:
            fh.write(json.dumps(scene_to_record(scene, vocab), sort_keys=True) + "\n")
            count += 1
    return count


def derive_label_vocab(records: Iterable[SceneRecord]) -> LabelVocab:
    """Sorted unique labels, for corpora shipped without a vocab file."""
    names = sorted({obj.label for record in records for obj in record.objects})
    return LabelVocab(tuple(names))


def filter_and_normalize(
    scene: Scene, min_area_frac: float = 0.02, max_objects: int = 20
) -> Scene | Rejection:
    """Drop boxes below *min_area_frac*; reject empty or over-full scenes."""
    kept = tuple(b for b in scene.boxes if b.area >= min_area_frac)
    if not kept:
        return Rejection(scene.id, "no_boxes", 0)
    if len(kept) > max_objects:
        return Rejection(scene.id, "too_many_objects", len(kept))
    return Scene(id=scene.id, caption=scene.caption, boxes=kept)


def canonical_key(box: LabeledBox) -> tuple[float, float, int]:
    """Bottom edge lowest on screen first, then left to right, then label."""
    return (-(box.y + box.h), box.x, box.label)


def canonical_order(boxes: Sequence[LabeledBox]) -> list[LabeledBox]:
    return sorted(boxes, key=canonical_key)


def is_canonical(boxes: Sequence[LabeledBox]) -> bool:
    keys = [canonical_key(b) for b in boxes]
    return all(a <= b for a, b in zip(keys, keys[1:], strict=False))
