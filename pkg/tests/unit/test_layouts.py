"""Tests for scene-file parsing, filtering and canonical ordering."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from layoutprior.data.layouts import (
    Rejection,
    canonical_order,
    derive_label_vocab,
    filter_and_normalize,
    is_canonical,
    load_layout_dataset,
    read_scene_records,
    write_scenes,
)
from layoutprior.data.types import LabeledBox, LabelVocab, Scene
from layoutprior.errors import DataFormatError, UnknownLabelError


class TestLoadLayoutDataset:
    def test_normalizes_by_canvas_size(self, scene_file: Path, vocab: LabelVocab) -> None:
        scenes = load_layout_dataset(scene_file, vocab)
        cat = scenes[0].boxes[0]
        assert cat.label == vocab.index("cat")
        assert cat.coords == pytest.approx((0.1, 0.1, 0.3, 0.4))

    def test_caption_list_fans_out(self, scene_file: Path, vocab: LabelVocab) -> None:
        scenes = load_layout_dataset(scene_file, vocab)
        assert [s.id for s in scenes] == ["s1", "s2#0", "s2#1"]
        assert scenes[1].boxes == scenes[2].boxes
        assert scenes[2].caption == "one dog"

    def test_unknown_label_names_label_and_line(self, scene_file: Path) -> None:
        with pytest.raises(UnknownLabelError) as info:
            load_layout_dataset(scene_file, LabelVocab(("cat", "dog")))
        assert info.value.label == "tree"
        assert "line 1" in info.value.message

    def test_malformed_record_reports_line(self, tmp_path: Path, vocab: LabelVocab) -> None:
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"id": "a", "caption": "x", "width": 1, "height": 1, "objects": []}\n'
            '{"id": "b", "width": 1, "height": 1, "objects": []}\n',
            encoding="utf-8",
        )
        with pytest.raises(DataFormatError) as info:
            load_layout_dataset(path, vocab)
        assert info.value.line == 2

    def test_out_of_canvas_box_is_cropped(self, tmp_path: Path, vocab: LabelVocab) -> None:
        path = tmp_path / "crop.jsonl"
        record = {
            "id": "c",
            "caption": "a cat",
            "width": 10,
            "height": 10,
            "objects": [{"label": "cat", "x": 8, "y": -2, "w": 5, "h": 5}],
        }
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        (scene,) = load_layout_dataset(path, vocab)
        assert scene.boxes[0].coords == pytest.approx((0.8, 0.0, 0.2, 0.3))


def test_derive_label_vocab_sorted_unique(scene_file: Path) -> None:
    assert derive_label_vocab(read_scene_records(scene_file)).names == ("cat", "dog", "tree")


def test_write_scenes_round_trips(tmp_path: Path, scene_file: Path, vocab: LabelVocab) -> None:
    scenes = load_layout_dataset(scene_file, vocab)
    out = tmp_path / "normalized.jsonl"
    assert write_scenes(scenes, vocab, out) == 3
    again = load_layout_dataset(out, vocab)
    assert [s.boxes for s in again] == [s.boxes for s in scenes]


class TestFilterAndNormalize:
    def test_drops_small_boxes(self) -> None:
        scene = Scene(
            "s",
            "c",
            (LabeledBox(0, 0.0, 0.0, 0.1, 0.1), LabeledBox(1, 0.0, 0.0, 0.5, 0.5)),
        )
        kept = filter_and_normalize(scene)
        assert isinstance(kept, Scene)
        assert [b.label for b in kept.boxes] == [1]

    def test_threshold_is_inclusive(self) -> None:
        scene = Scene("s", "c", (LabeledBox(0, 0.0, 0.0, 0.2, 0.1),))
        assert isinstance(filter_and_normalize(scene, min_area_frac=0.02), Scene)

    def test_scene_left_empty_is_rejected(self) -> None:
        scene = Scene("s", "c", (LabeledBox(0, 0.0, 0.0, 0.05, 0.05),))
        assert filter_and_normalize(scene) == Rejection("s", "no_boxes", 0)

    def test_too_many_objects_is_rejected(self) -> None:
        boxes = tuple(LabeledBox(0, 0.0, 0.0, 0.5, 0.5) for _ in range(25))
        outcome = filter_and_normalize(Scene("busy", "c", boxes))
        assert outcome == Rejection("busy", "too_many_objects", 25)

    def test_exactly_max_objects_is_kept(self) -> None:
        boxes = tuple(LabeledBox(0, 0.0, 0.0, 0.5, 0.5) for _ in range(20))
        assert isinstance(filter_and_normalize(Scene("full", "c", boxes)), Scene)


class TestCanonicalOrder:
    def test_lowest_bottom_edge_first(self) -> None:
        high = LabeledBox(0, 0.0, 0.0, 0.2, 0.2)
        low = LabeledBox(1, 0.5, 0.6, 0.2, 0.2)
        assert canonical_order([high, low]) == [low, high]

    def test_ties_broken_left_to_right_then_label(self) -> None:
        right = LabeledBox(0, 0.5, 0.0, 0.2, 0.2)
        left_b = LabeledBox(2, 0.1, 0.0, 0.2, 0.2)
        left_a = LabeledBox(1, 0.1, 0.0, 0.2, 0.2)
        assert canonical_order([right, left_b, left_a]) == [left_a, left_b, right]

    def test_is_canonical(self) -> None:
        a = LabeledBox(0, 0.0, 0.5, 0.2, 0.5)
        b = LabeledBox(0, 0.0, 0.0, 0.2, 0.2)
        assert is_canonical([a, b])
        assert not is_canonical([b, a])
        assert is_canonical([])
