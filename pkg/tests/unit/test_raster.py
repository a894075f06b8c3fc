"""Tests for the layout rasterizer."""

from __future__ import annotations

import random

import numpy as np
import pytest
import torch

from layoutprior.data.types import LabeledBox
from layoutprior.layout.raster import pixel_centers, rasterize, rasterize_batch


def _random_boxes(rng: random.Random, C: int) -> list[LabeledBox]:
    boxes = []
    for _ in range(rng.randint(0, 6)):
        x, y = rng.random() * 0.95, rng.random() * 0.95
        w = rng.uniform(0.01, 1.0 - x)
        h = rng.uniform(0.01, 1.0 - y)
        boxes.append(LabeledBox(label=rng.randrange(C), x=x, y=y, w=w, h=h))
    return boxes


def _brute_force(boxes: list[LabeledBox], C: int, W: int, H: int) -> np.ndarray:
    out = np.zeros((C, W, H), dtype=np.uint8)
    for b in boxes:
        for i in range(W):
            cx = (i + 0.5) / W
            if not b.x <= cx < b.x + b.w:
                continue
            for j in range(H):
                cy = (j + 0.5) / H
                if b.y <= cy < b.y + b.h:
                    out[b.label, i, j] = 1
    return out


class TestRasterize:
    def test_matches_per_pixel_membership(self) -> None:
        rng = random.Random(3)
        for _ in range(100):
            boxes = _random_boxes(rng, 5)
            assert np.array_equal(rasterize(boxes, 5, 64, 64), _brute_force(boxes, 5, 64, 64))

    def test_blank_layout_is_all_zero(self) -> None:
        raster = rasterize([], 3, 8, 8)
        assert raster.shape == (3, 8, 8)
        assert raster.sum() == 0

    def test_full_canvas_box_covers_everything(self) -> None:
        raster = rasterize([LabeledBox(1, 0.0, 0.0, 1.0, 1.0)], 2, 4, 4)
        assert raster[1].all()
        assert not raster[0].any()

    def test_extent_is_half_open(self) -> None:
        # pixel centres at 0.125, 0.375, 0.625, 0.875; a box ending at 0.375 excludes pixel 1
        raster = rasterize([LabeledBox(0, 0.0, 0.0, 0.375, 1.0)], 1, 4, 4)
        assert raster[0, :, 0].tolist() == [1, 0, 0, 0]

    def test_box_left_edge_on_centre_is_included(self) -> None:
        raster = rasterize([LabeledBox(0, 0.375, 0.0, 0.1, 1.0)], 1, 4, 4)
        assert raster[0, :, 0].tolist() == [0, 1, 0, 0]

    def test_box_between_centres_covers_nothing(self) -> None:
        raster = rasterize([LabeledBox(0, 0.13, 0.13, 0.2, 0.2)], 1, 4, 4)
        assert raster.sum() == 0

    def test_same_label_boxes_union(self) -> None:
        boxes = [LabeledBox(0, 0.0, 0.0, 0.5, 0.5), LabeledBox(0, 0.25, 0.25, 0.5, 0.5)]
        raster = rasterize(boxes, 1, 4, 4)
        assert raster.max() == 1
        assert raster.sum() == 7

    def test_first_axis_is_x(self) -> None:
        raster = rasterize([LabeledBox(0, 0.0, 0.5, 0.25, 0.5)], 1, 4, 4)
        assert raster[0, 0].tolist() == [0, 0, 1, 1]
        assert raster[0, 1:].sum() == 0

    def test_label_outside_range_raises(self) -> None:
        with pytest.raises(ValueError, match="outside"):
            rasterize([LabeledBox(3, 0.0, 0.0, 0.5, 0.5)], 3, 4, 4)

    def test_zero_dimension_raises(self) -> None:
        with pytest.raises(ValueError):
            rasterize([], 1, 0, 4)


def test_pixel_centers() -> None:
    assert pixel_centers(4).tolist() == [0.125, 0.375, 0.625, 0.875]


def test_rasterize_batch_stacks_layouts() -> None:
    layouts = [[], [LabeledBox(1, 0.0, 0.0, 1.0, 1.0)]]
    batch = rasterize_batch(layouts, 2, 4, 4, dtype=torch.float64)
    assert batch.shape == (2, 2, 4, 4)
    assert batch.dtype == torch.float64
    assert float(batch[0].sum()) == 0.0
    assert float(batch[1, 1].sum()) == 16.0


def test_rasterize_batch_empty() -> None:
    assert rasterize_batch([], 3, 4, 4).shape == (0, 3, 4, 4)
