"""Teacher-forced training and evaluation of the layout generator."""

from __future__ import annotations

import copy
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Literal

import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field

from layoutprior.artifacts.metrics_log import MetricsLogProtocol
from layoutprior.data.types import Scene
from layoutprior.errors import TrainingDivergedError
from layoutprior.layout.batching import LayoutBatch, iter_batches, split_validation
from layoutprior.layout.decoder import LayoutGenerator
from layoutprior.logging import get_logger
from layoutprior.textenc.tokenizer import Tokenizer

__all__ = [
    "LayoutTrainConfig",
    "LayoutMetrics",
    "LayoutTrainResult",
    "box_residual_norm",
    "layout_loss",
    "batch_layout_loss",
    "layout_metrics",
    "make_optimizer",
    "train_layout",
    "eval_layout",
]

logger = get_logger()


class LayoutTrainConfig(BaseModel):
    """Optimizer and schedule; defaults are the full-scale recipe."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    lr: float = Field(default=5e-5, gt=0)
    batch_size: int = Field(default=32, ge=1)
    epochs: int = Field(default=15, ge=1)
    step_size: int = Field(default=3, ge=1)
    gamma: float = Field(default=0.8, gt=0, le=1)
    optimizer: Literal["adam", "adamw"] = "adam"
    weight_decay: float = Field(default=0.0, ge=0)
    val_fraction: float = Field(default=0.05, ge=0, lt=1)
    max_len: int = Field(default=128, ge=8)
    seed: int = 0


@dataclass(frozen=True)
class LayoutMetrics:
    label_accuracy: float
    bbox_mse: float
    loss: float
    steps: int = 0
    boxes: int = 0

    def as_record(self, epoch: int, split: str) -> dict[str, float | int | str]:
        return {
            "epoch": epoch,
            "split": split,
            "label_accuracy": self.label_accuracy,
            "bbox_mse": self.bbox_mse,
            "loss": self.loss,
        }


@dataclass
class LayoutTrainResult:
    best_state: dict[str, torch.Tensor]
    best_epoch: int
    history: list[dict[str, float | int | str]] = field(default_factory=list)


# ── loss ─────────────────────────────────────────────────────────


def box_residual_norm(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Euclidean norm of the 4-vector residual along the last axis.

    The square is clamped away from zero before the root so the gradient
    stays finite at a perfect prediction.
    """
    sq = ((pred - target) ** 2).sum(dim=-1)
    return torch.sqrt(sq.clamp(min=torch.finfo(sq.dtype).tiny))


def layout_loss(
    label_dists: torch.Tensor,
    boxes: torch.Tensor,
    target_labels: torch.Tensor,
    target_boxes: torch.Tensor,
    *,
    end_index: int,
) -> torch.Tensor:
    """One scene: sum_t ||b_t - b*_t||_2 - log p(l*_t), no box term at the end step.

    label_dists (T, C + 1) are probabilities, boxes and target_boxes (T, 4),
    target_labels (T,) with the end class last.
    """
    T = target_labels.shape[0]
    if label_dists.shape[0] != T or boxes.shape[0] != T or target_boxes.shape[0] != T:
        raise ValueError("predictions and targets must have the same number of steps")
    if T == 0 or int(target_labels[-1]) != end_index:
        raise ValueError("the final target label must be the end class")
    picked = label_dists.gather(1, target_labels.view(-1, 1)).squeeze(1)
    nll = -torch.log(picked).sum()
    not_end = target_labels != end_index
    box_term = box_residual_norm(boxes[not_end], target_boxes[not_end]).sum()
    return nll + box_term


def batch_layout_loss(
    logits: torch.Tensor, boxes: torch.Tensor, batch: LayoutBatch
) -> torch.Tensor:
    """Mean over scenes of the per-scene layout_loss, on padded tensors."""
    log_p = F.log_softmax(logits, dim=-1)
    nll = -log_p.gather(2, batch.labels.unsqueeze(-1)).squeeze(-1)
    nll = (nll * batch.step_mask).sum(dim=1)
    residual = box_residual_norm(boxes, batch.boxes.to(boxes.dtype))
    box_term = (residual * batch.box_mask).sum(dim=1)
    return (nll + box_term).mean()


def layout_metrics(
    logits: torch.Tensor, boxes: torch.Tensor, batch: LayoutBatch
) -> tuple[int, int, float, int]:
    """(correct labels, steps, summed squared box error, box count) for one batch."""
    pred = logits.argmax(dim=-1)
    correct = int(((pred == batch.labels) & batch.step_mask).sum())
    steps = int(batch.step_mask.sum())
    sq = ((boxes - batch.boxes.to(boxes.dtype)) ** 2).mean(dim=-1)
    sq_sum = float((sq * batch.box_mask).sum())
    return correct, steps, sq_sum, int(batch.box_mask.sum())


# ── loops ────────────────────────────────────────────────────────


@torch.no_grad()
def _evaluate(
    model: LayoutGenerator,
    scenes: Sequence[Scene],
    tokenizer: Tokenizer,
    config: LayoutTrainConfig,
) -> LayoutMetrics:
    was_training = model.training
    model.eval()
    correct = steps = n_boxes = 0
    sq_sum = loss_sum = 0.0
    for batch in iter_batches(
        scenes,
        tokenizer,
        batch_size=config.batch_size,
        num_classes=model.num_classes,
        raster_size=model.config.raster,
        max_len=min(config.max_len, model.text_encoder.config.max_len),
        dtype=next(model.parameters()).dtype,
    ):
        logits, boxes = model(batch.captions, batch.labels, batch.raster_at)
        loss_sum += float(batch_layout_loss(logits, boxes, batch)) * len(batch)
        c, s, sq, nb = layout_metrics(logits, boxes, batch)
        correct, steps, sq_sum, n_boxes = correct + c, steps + s, sq_sum + sq, n_boxes + nb
    model.train(was_training)
    return LayoutMetrics(
        label_accuracy=correct / steps if steps else 0.0,
        bbox_mse=sq_sum / n_boxes if n_boxes else 0.0,
        loss=loss_sum / len(scenes) if scenes else 0.0,
        steps=steps,
        boxes=n_boxes,
    )


def make_optimizer(
    params: Iterable[torch.nn.Parameter], config: LayoutTrainConfig
) -> torch.optim.Optimizer:
    if config.optimizer == "adamw":
        return torch.optim.AdamW(params, lr=config.lr, weight_decay=config.weight_decay)
    return torch.optim.Adam(params, lr=config.lr, weight_decay=config.weight_decay)


def train_layout(
    model: LayoutGenerator,
    scenes: Sequence[Scene],
    tokenizer: Tokenizer,
    config: LayoutTrainConfig,
    *,
    val_scenes: Sequence[Scene] | None = None,
    metrics_log: MetricsLogProtocol | None = None,
) -> LayoutTrainResult:
    """Teacher-forced training; keeps the weights of the best validation epoch.

    Without *val_scenes*, ``config.val_fraction`` of *scenes* is held out by a
    seeded shuffle. Best means highest validation label accuracy, lower loss
    breaking ties.
    """
    if not scenes:
        raise ValueError("cannot train on an empty dataset")
    if val_scenes is None:
        train_scenes, held_out = split_validation(scenes, config.val_fraction, config.seed)
    else:
        train_scenes, held_out = list(scenes), list(val_scenes)
    if not train_scenes:
        raise ValueError("validation split left no training scenes")

    optimizer = make_optimizer(list(model.parameters()), config)
    scheduler = torch.optim.lr_scheduler.StepLR(
        optimizer, step_size=config.step_size, gamma=config.gamma
    )
    result = LayoutTrainResult(best_state=copy.deepcopy(model.state_dict()), best_epoch=0)
    best_key: tuple[float, float] | None = None

    for epoch in range(1, config.epochs + 1):
        model.train()
        loss_sum = 0.0
        correct = steps = n_boxes = 0
        sq_sum = 0.0
        for batch_no, batch in enumerate(
            iter_batches(
                train_scenes,
                tokenizer,
                batch_size=config.batch_size,
                num_classes=model.num_classes,
                raster_size=model.config.raster,
                max_len=min(config.max_len, model.text_encoder.config.max_len),
                shuffle_seed=config.seed * 1000 + epoch,
                dtype=next(model.parameters()).dtype,
            )
        ):
            logits, boxes = model(batch.captions, batch.labels, batch.raster_at)
            loss = batch_layout_loss(logits, boxes, batch)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite layout loss at epoch {epoch}, batch {batch_no}",
                    epoch=epoch,
                    batch=batch_no,
                    scene_ids=list(batch.scene_ids),
                    lr=scheduler.get_last_lr()[0],
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            loss_sum += float(loss) * len(batch)
            c, s, sq, nb = layout_metrics(logits.detach(), boxes.detach(), batch)
            correct, steps, sq_sum, n_boxes = correct + c, steps + s, sq_sum + sq, n_boxes + nb
        scheduler.step()

        train_metrics = LayoutMetrics(
            label_accuracy=correct / steps,
            bbox_mse=sq_sum / n_boxes if n_boxes else 0.0,
            loss=loss_sum / len(train_scenes),
            steps=steps,
            boxes=n_boxes,
        )
        records = [train_metrics.as_record(epoch, "train")]
        judged = train_metrics
        if held_out:
            judged = _evaluate(model, held_out, tokenizer, config)
            records.append(judged.as_record(epoch, "val"))
        for record in records:
            result.history.append(record)
            if metrics_log is not None:
                metrics_log.append(record)
        logger.info(
            "layout_epoch",
            epoch=epoch,
            train_loss=train_metrics.loss,
            label_accuracy=judged.label_accuracy,
            bbox_mse=judged.bbox_mse,
        )

        key = (judged.label_accuracy, -judged.loss)
        if best_key is None or key > best_key:
            best_key = key
            result.best_epoch = epoch
            result.best_state = copy.deepcopy(model.state_dict())

    model.load_state_dict(result.best_state)
    return result


def eval_layout(
    model: LayoutGenerator,
    scenes: Sequence[Scene],
    tokenizer: Tokenizer,
    *,
    batch_size: int = 32,
    max_len: int = 128,
) -> LayoutMetrics:
    """Teacher-forced metrics: each step is scored given the ground-truth prefix."""
    if not scenes:
        raise ValueError("cannot evaluate an empty dataset")
    config = LayoutTrainConfig(batch_size=batch_size, max_len=max_len)
    return _evaluate(model, scenes, tokenizer, config)
