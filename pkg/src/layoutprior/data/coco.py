"""Convert official COCO instance + caption annotation files into scene records."""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path
from typing import Any, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from layoutprior.data.types import LabelVocab
from layoutprior.errors import DataFormatError

__all__ = ["coco_label_vocab", "coco_to_records", "write_records"]

_M = TypeVar("_M", bound=BaseModel)


class _Category(BaseModel):
    model_config = ConfigDict(extra="ignore")

    id: int
    name: str


class _Image(BaseModel):
    model_config = ConfigDict(extra="ignore")

    id: int
    width: int = Field(gt=0)
    height: int = Field(gt=0)


class _Instance(BaseModel):
    model_config = ConfigDict(extra="ignore")

    image_id: int
    category_id: int
    bbox: tuple[float, float, float, float]
    iscrowd: int = 0


class _Caption(BaseModel):
    model_config = ConfigDict(extra="ignore")

    image_id: int
    caption: str


class _Instances(BaseModel):
    model_config = ConfigDict(extra="ignore")

    images: list[_Image] = Field(default_factory=list)
    categories: list[_Category] = Field(default_factory=list)
    annotations: list[_Instance] = Field(default_factory=list)


class _Captions(BaseModel):
    model_config = ConfigDict(extra="ignore")

    annotations: list[_Caption] = Field(default_factory=list)


def _load(path: str | Path, model: type[_M]) -> _M:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"invalid JSON: {exc.msg}", path=str(path), line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise DataFormatError("expected a COCO annotation object", path=str(path))
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        raise DataFormatError(
            f"malformed COCO annotations at {where}: {first['msg']}", path=str(path)
        ) from exc


def coco_label_vocab(instances_path: str | Path) -> LabelVocab:
    """Category names in category-id order (80 names for COCO 2014/2017)."""
    categories = _load(instances_path, _Instances).categories
    return LabelVocab(tuple(c.name for c in sorted(categories, key=lambda c: c.id)))


def coco_to_records(
    instances_path: str | Path, captions_path: str | Path
) -> list[dict[str, Any]]:
    """Join boxes and captions per image; crowd annotations are skipped.

    Images without captions are dropped. Coordinates stay in pixels; the
    scene loader normalizes them by the image size.
    """
    instances = _load(instances_path, _Instances)
    captions = _load(captions_path, _Captions)

    names = {c.id: c.name for c in instances.categories}
    objects: dict[int, list[dict[str, Any]]] = defaultdict(list)
    for ann in instances.annotations:
        if ann.iscrowd:
            continue
        x, y, w, h = ann.bbox
        if w <= 0 or h <= 0:
            continue
        if ann.category_id not in names:
            raise DataFormatError(
                f"annotation for image {ann.image_id} has unknown category_id "
                f"{ann.category_id}",
                path=str(instances_path),
            )
        objects[ann.image_id].append(
            {"label": names[ann.category_id], "x": x, "y": y, "w": w, "h": h}
        )

    texts: dict[int, list[str]] = defaultdict(list)
    for cap in captions.annotations:
        texts[cap.image_id].append(cap.caption.strip())

    records: list[dict[str, Any]] = []
    for image in sorted(instances.images, key=lambda im: im.id):
        if not texts.get(image.id):
            continue
        records.append(
            {
                "id": str(image.id),
                "captions": texts[image.id],
                "width": image.width,
                "height": image.height,
                "objects": objects.get(image.id, []),
            }
        )
    return records


def write_records(records: list[dict[str, Any]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
