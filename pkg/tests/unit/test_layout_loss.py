"""Tests for the layout loss and teacher-forced metrics."""

from __future__ import annotations

import math

import pytest
import torch

from layoutprior.data.types import LabeledBox, Scene
from layoutprior.layout.batching import make_batch
from layoutprior.layout.training import (
    batch_layout_loss,
    box_residual_norm,
    layout_loss,
    layout_metrics,
)
from layoutprior.textenc.tokenizer import Tokenizer, build_vocab

END = 80


def _one_hot(labels: list[int], classes: int = END + 1) -> torch.Tensor:
    return torch.nn.functional.one_hot(torch.tensor(labels), classes).double()


class TestLayoutLoss:
    def setup_method(self) -> None:
        self.labels = torch.tensor([3, 7, END])
        self.boxes = torch.tensor(
            [[0.1, 0.1, 0.2, 0.2], [0.5, 0.5, 0.3, 0.3], [0.0, 0.0, 0.0, 0.0]],
            dtype=torch.float64,
        )

    def test_perfect_prediction_is_zero(self) -> None:
        loss = layout_loss(
            _one_hot([3, 7, END]), self.boxes, self.labels, self.boxes, end_index=END
        )
        assert float(loss) == pytest.approx(0.0, abs=1e-9)

    def test_uniform_labels_cost_log_of_class_count(self) -> None:
        uniform = torch.full((3, END + 1), 1.0 / (END + 1), dtype=torch.float64)
        loss = layout_loss(uniform, self.boxes, self.labels, self.boxes, end_index=END)
        assert float(loss) == pytest.approx(3 * math.log(81), rel=1e-9)

    def test_box_term_is_euclidean_norm(self) -> None:
        shifted = self.boxes.clone()
        shifted[0] += torch.tensor([0.3, 0.4, 0.0, 0.0], dtype=torch.float64)
        loss = layout_loss(_one_hot([3, 7, END]), shifted, self.labels, self.boxes, end_index=END)
        assert float(loss) == pytest.approx(0.5)

    def test_end_step_box_is_ignored(self) -> None:
        wild = self.boxes.clone()
        wild[2] = torch.tensor([1.0, 1.0, 1.0, 1.0], dtype=torch.float64)
        loss = layout_loss(_one_hot([3, 7, END]), wild, self.labels, self.boxes, end_index=END)
        assert float(loss) == pytest.approx(0.0, abs=1e-9)

    def test_must_end_with_end_class(self) -> None:
        with pytest.raises(ValueError, match="end class"):
            layout_loss(
                _one_hot([3, 7, 1]),
                self.boxes,
                torch.tensor([3, 7, 1]),
                self.boxes,
                end_index=END,
            )

    def test_mismatched_lengths_rejected(self) -> None:
        with pytest.raises(ValueError, match="same number of steps"):
            layout_loss(_one_hot([3, END]), self.boxes, self.labels, self.boxes, end_index=END)


def test_residual_norm_gradient_is_finite_at_zero() -> None:
    pred = torch.zeros(2, 4, dtype=torch.float64, requires_grad=True)
    box_residual_norm(pred, torch.zeros(2, 4, dtype=torch.float64)).sum().backward()
    assert pred.grad is not None
    assert torch.isfinite(pred.grad).all()


class TestBatchLoss:
    def setup_method(self) -> None:
        self.tok: Tokenizer = build_vocab(["a cat", "two cats"])
        self.scenes = [
            Scene("a", "a cat", (LabeledBox(0, 0.1, 0.1, 0.2, 0.2),)),
            Scene(
                "b",
                "two cats",
                (LabeledBox(1, 0.5, 0.5, 0.2, 0.2), LabeledBox(0, 0.0, 0.0, 0.3, 0.3)),
            ),
        ]
        self.batch = make_batch(
            self.scenes, self.tok, num_classes=2, raster_size=4, dtype=torch.float64
        )
        torch.manual_seed(0)
        self.logits = torch.randn(2, 3, 3, dtype=torch.float64)
        self.boxes = torch.rand(2, 3, 4, dtype=torch.float64)

    def test_mean_of_per_scene_losses(self) -> None:
        per_scene = []
        for row, scene in enumerate(self.scenes):
            T = len(scene.boxes) + 1
            per_scene.append(
                layout_loss(
                    torch.softmax(self.logits[row, :T], -1),
                    self.boxes[row, :T],
                    self.batch.labels[row, :T],
                    self.batch.boxes[row, :T],
                    end_index=2,
                )
            )
        expected = torch.stack(per_scene).mean()
        got = batch_layout_loss(self.logits, self.boxes, self.batch)
        assert float(got) == pytest.approx(float(expected), rel=1e-10)

    def test_metrics_count_end_steps_but_not_their_boxes(self) -> None:
        logits = torch.full((2, 3, 3), -10.0, dtype=torch.float64)
        logits.scatter_(2, self.batch.labels.unsqueeze(-1), 10.0)
        correct, steps, sq_sum, n_boxes = layout_metrics(logits, self.batch.boxes, self.batch)
        assert (correct, steps, n_boxes) == (5, 5, 3)
        assert sq_sum == 0.0
