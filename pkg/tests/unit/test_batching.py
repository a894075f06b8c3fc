"""Tests for teacher-forced batch construction."""

from __future__ import annotations

import pytest
import torch

from layoutprior.data.types import LabeledBox, Scene
from layoutprior.layout.batching import iter_batches, make_batch, split_validation
from layoutprior.textenc.tokenizer import build_vocab

TOK = build_vocab(["a cat and a dog"])


def _scene(scene_id: str, *boxes: LabeledBox) -> Scene:
    return Scene(scene_id, "a cat and a dog", boxes)


class TestMakeBatch:
    def setup_method(self) -> None:
        self.low = LabeledBox(1, 0.0, 0.5, 0.5, 0.5)
        self.high = LabeledBox(0, 0.5, 0.0, 0.5, 0.5)
        self.batch = make_batch(
            [_scene("two", self.low, self.high), _scene("one", self.high)],
            TOK,
            num_classes=2,
            raster_size=4,
        )

    def test_targets_end_with_end_label(self) -> None:
        assert self.batch.labels.tolist() == [[1, 0, 2], [0, 2, 2]]
        assert self.batch.step_mask.tolist() == [[True, True, True], [True, True, False]]
        assert self.batch.box_mask.tolist() == [[True, True, False], [True, False, False]]
        assert self.batch.num_steps == 3

    def test_raster_at_uses_ground_truth_prefix(self) -> None:
        assert not self.batch.raster_at(0).any()
        first = self.batch.raster_at(1)
        assert first[0, 1].sum() == 4  # low box, bottom-left quadrant
        assert first[0, 0].sum() == 0
        assert first[1, 0].sum() == 4
        assert self.batch.raster_at(2)[0].sum() == 8

    def test_non_canonical_scene_rejected(self) -> None:
        with pytest.raises(ValueError, match="canonically"):
            make_batch(
                [_scene("bad", self.high, self.low)], TOK, num_classes=2, raster_size=4
            )

    def test_label_outside_vocab_rejected(self) -> None:
        with pytest.raises(ValueError, match="outside"):
            make_batch(
                [_scene("bad", LabeledBox(5, 0.0, 0.0, 0.5, 0.5))],
                TOK,
                num_classes=2,
                raster_size=4,
            )

    def test_empty_rejected(self) -> None:
        with pytest.raises(ValueError):
            make_batch([], TOK, num_classes=2, raster_size=4)

    def test_dtype_flows_through(self) -> None:
        batch = make_batch(
            [_scene("one", self.high)], TOK, num_classes=2, raster_size=4, dtype=torch.float64
        )
        assert batch.boxes.dtype == torch.float64
        assert batch.raster_at(1).dtype == torch.float64


def test_iter_batches_sizes_and_seeded_order() -> None:
    scenes = [_scene(f"s{i}", LabeledBox(0, 0.0, 0.0, 0.5, 0.5)) for i in range(7)]
    sizes = [len(b) for b in iter_batches(scenes, TOK, batch_size=3, num_classes=1, raster_size=4)]
    assert sizes == [3, 3, 1]

    def order(seed: int) -> list[str]:
        return [
            sid
            for b in iter_batches(
                scenes, TOK, batch_size=3, num_classes=1, raster_size=4, shuffle_seed=seed
            )
            for sid in b.scene_ids
        ]

    assert order(1) == order(1)
    assert sorted(order(1)) == sorted(s.id for s in scenes)


class TestSplitValidation:
    def setup_method(self) -> None:
        self.scenes = [_scene(f"s{i}") for i in range(20)]

    def test_fraction_and_disjoint(self) -> None:
        train, val = split_validation(self.scenes, 0.25, seed=0)
        assert len(val) == 5
        assert len(train) == 15
        assert not {s.id for s in train} & {s.id for s in val}

    def test_at_least_one_held_out(self) -> None:
        _, val = split_validation(self.scenes[:3], 0.05, seed=0)
        assert len(val) == 1

    def test_zero_fraction(self) -> None:
        train, val = split_validation(self.scenes, 0.0, seed=0)
        assert (len(train), len(val)) == (20, 0)

    def test_bad_fraction(self) -> None:
        with pytest.raises(ValueError):
            split_validation(self.scenes, 1.0, seed=0)
