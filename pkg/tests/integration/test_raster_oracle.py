"""Rasterizer against per-pixel centre membership on many random layouts."""

from __future__ import annotations

import random

import numpy as np
import pytest

from layoutprior.data.types import LabeledBox
from layoutprior.layout.raster import pixel_centers, rasterize

SIZE = 64
CLASSES = 80


def _random_boxes(rng: random.Random) -> list[LabeledBox]:
    boxes = []
    for _ in range(rng.randint(0, 20)):
        x, y = rng.random() * 0.99, rng.random() * 0.99
        boxes.append(
            LabeledBox(
                label=rng.randrange(CLASSES),
                x=x,
                y=y,
                w=rng.uniform(1e-3, 1.0 - x),
                h=rng.uniform(1e-3, 1.0 - y),
            )
        )
    return boxes


def _membership(boxes: list[LabeledBox]) -> np.ndarray:
    out = np.zeros((CLASSES, SIZE, SIZE), dtype=np.uint8)
    centres = pixel_centers(SIZE)
    for box in boxes:
        for i, cx in enumerate(centres):
            for j, cy in enumerate(centres):
                if box.x <= cx < box.x + box.w and box.y <= cy < box.y + box.h:
                    out[box.label, i, j] = 1
    return out


@pytest.mark.slow
def test_thousand_random_layouts() -> None:
    rng = random.Random(2024)
    mismatched = 0
    for _ in range(1000):
        boxes = _random_boxes(rng)
        mismatched += int((rasterize(boxes, CLASSES, SIZE, SIZE) != _membership(boxes)).sum())
    assert mismatched == 0
