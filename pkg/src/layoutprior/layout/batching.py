"""Teacher-forced batches: captions, targets with the end label, ground-truth rasters."""

from __future__ import annotations

import random
from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import torch

from layoutprior.data.layouts import canonical_key, is_canonical
from layoutprior.data.types import LabeledBox, Scene
from layoutprior.layout.raster import rasterize_batch
from layoutprior.textenc.tokenizer import TokenBatch, Tokenizer, pad_batch

__all__ = ["LayoutBatch", "make_batch", "iter_batches", "split_validation"]


@dataclass(frozen=True)
class LayoutBatch:
    """Targets padded to T = longest scene + 1 (the end step).

    step_mask marks real steps, box_mask the non-end ones. Padding positions
    carry the end label and a zero box and are excluded by the masks.
    """

    scene_ids: tuple[str, ...]
    captions: TokenBatch
    layouts: tuple[tuple[LabeledBox, ...], ...]
    labels: torch.Tensor  # (B, T) long
    boxes: torch.Tensor  # (B, T, 4)
    step_mask: torch.Tensor  # (B, T) bool
    box_mask: torch.Tensor  # (B, T) bool
    num_classes: int
    raster_size: int
    dtype: torch.dtype = torch.float32

    def __len__(self) -> int:
        return len(self.scene_ids)

    @property
    def num_steps(self) -> int:
        return int(self.labels.shape[1])

    def raster_at(self, t: int) -> torch.Tensor:
        """I_{t-1}: the raster of ground-truth boxes 1..t-1 (0-based prefix of length t)."""
        prefixes = [boxes[:t] for boxes in self.layouts]
        return rasterize_batch(
            prefixes, self.num_classes, self.raster_size, self.raster_size, dtype=self.dtype
        )


def make_batch(
    scenes: Sequence[Scene],
    tokenizer: Tokenizer,
    *,
    num_classes: int,
    raster_size: int,
    max_len: int = 128,
    dtype: torch.dtype = torch.float32,
) -> LayoutBatch:
    if not scenes:
        raise ValueError("cannot batch zero scenes")
    for scene in scenes:
        if not is_canonical(scene.boxes):
            keys = [canonical_key(b) for b in scene.boxes]
            raise ValueError(f"scene {scene.id} is not canonically ordered: {keys}")
    end = num_classes
    T = max(len(s.boxes) for s in scenes) + 1
    B = len(scenes)
    labels = torch.full((B, T), end, dtype=torch.long)
    boxes = torch.zeros((B, T, 4), dtype=dtype)
    step_mask = torch.zeros((B, T), dtype=torch.bool)
    box_mask = torch.zeros((B, T), dtype=torch.bool)
    for row, scene in enumerate(scenes):
        n = len(scene.boxes)
        for t, box in enumerate(scene.boxes):
            if not 0 <= box.label < num_classes:
                raise ValueError(f"scene {scene.id}: label {box.label} outside [0, {num_classes})")
            labels[row, t] = box.label
            boxes[row, t] = torch.tensor(box.coords, dtype=dtype)
        step_mask[row, : n + 1] = True
        box_mask[row, :n] = True
    captions = pad_batch(
        [tokenizer.tokenize(s.caption, max_len) for s in scenes], tokenizer.pad_id
    )
    return LayoutBatch(
        scene_ids=tuple(s.id for s in scenes),
        captions=captions,
        layouts=tuple(s.boxes for s in scenes),
        labels=labels,
        boxes=boxes,
        step_mask=step_mask,
        box_mask=box_mask,
        num_classes=num_classes,
        raster_size=raster_size,
        dtype=dtype,
    )


def iter_batches(
    scenes: Sequence[Scene],
    tokenizer: Tokenizer,
    *,
    batch_size: int,
    num_classes: int,
    raster_size: int,
    max_len: int = 128,
    shuffle_seed: int | None = None,
    dtype: torch.dtype = torch.float32,
) -> Iterator[LayoutBatch]:
    """Fixed-size batches in file order, or in a seeded shuffle order."""
    order = list(range(len(scenes)))
    if shuffle_seed is not None:
        random.Random(shuffle_seed).shuffle(order)
    for start in range(0, len(order), batch_size):
        chunk = [scenes[i] for i in order[start : start + batch_size]]
        yield make_batch(
            chunk,
            tokenizer,
            num_classes=num_classes,
            raster_size=raster_size,
            max_len=max_len,
            dtype=dtype,
        )


def split_validation(
    scenes: Sequence[Scene], fraction: float, seed: int
) -> tuple[list[Scene], list[Scene]]:
    """Seeded hold-out of ``fraction`` of scenes (at least one when there are two or more)."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError("validation fraction must lie in [0, 1)")
    order = list(range(len(scenes)))
    random.Random(seed).shuffle(order)
    n_val = round(len(scenes) * fraction)
    if fraction > 0 and n_val == 0 and len(scenes) >= 2:
        n_val = 1
    held = set(order[:n_val])
    train = [s for i, s in enumerate(scenes) if i not in held]
    val = [s for i, s in enumerate(scenes) if i in held]
    return train, val
