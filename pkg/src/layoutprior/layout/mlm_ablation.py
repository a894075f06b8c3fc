"""Caption-MLM encoder: same architecture as the layout-trained encoder, MLM supervision only."""

from __future__ import annotations

import random
from collections.abc import Sequence
from dataclasses import dataclass, field

import torch
from pydantic import BaseModel, ConfigDict, Field

from layoutprior.artifacts.metrics_log import MetricsLogProtocol
from layoutprior.determinism import torch_generator
from layoutprior.errors import TrainingDivergedError
from layoutprior.logging import get_logger
from layoutprior.textenc.encoder import EncoderConfig, TextEncoder
from layoutprior.textenc.mlm import MaskedLMHead, mlm_step
from layoutprior.textenc.tokenizer import Tokenizer, pad_batch

__all__ = ["MLMConfig", "MLMResult", "train_mlm_ablation"]

logger = get_logger()


class MLMConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    mask_rate: float = Field(default=0.15, gt=0, lt=1)
    lr: float = Field(default=5e-5, gt=0)
    batch_size: int = Field(default=32, ge=1)
    epochs: int = Field(default=15, ge=1)
    weight_decay: float = Field(default=0.01, ge=0)
    max_len: int = Field(default=128, ge=8)
    seed: int = 0


@dataclass
class MLMResult:
    encoder: TextEncoder
    initial_loss: float
    history: list[dict[str, float | int | str]] = field(default_factory=list)


def train_mlm_ablation(
    captions: Sequence[str],
    tokenizer: Tokenizer,
    encoder_config: EncoderConfig,
    config: MLMConfig,
    *,
    metrics_log: MetricsLogProtocol | None = None,
) -> MLMResult:
    """Train a fresh encoder of *encoder_config* with the masked-LM objective on captions."""
    if not captions:
        raise ValueError("caption corpus is empty")
    encoder_config = encoder_config.with_vocab(len(tokenizer))
    encoder = TextEncoder(encoder_config)
    head = MaskedLMHead(encoder_config.hidden, len(tokenizer), seed=config.seed)
    params = [*encoder.parameters(), *head.parameters()]
    optimizer = torch.optim.AdamW(params, lr=config.lr, weight_decay=config.weight_decay)
    mask_gen = torch_generator(config.seed)
    max_len = min(config.max_len, encoder_config.max_len)
    sequences = [tokenizer.tokenize(c, max_len) for c in captions]
    special = tokenizer.special_ids

    def step(rows: list[int]) -> torch.Tensor:
        batch = pad_batch([sequences[i] for i in rows], tokenizer.pad_id)
        return mlm_step(
            encoder,
            head,
            batch,
            config.mask_rate,
            mask_id=tokenizer.mask_id,
            special_ids=special,
            generator=mask_gen,
        )

    with torch.no_grad():
        encoder.eval()
        initial = float(step(list(range(min(len(sequences), config.batch_size)))))
    result = MLMResult(encoder=encoder, initial_loss=initial)

    order = list(range(len(sequences)))
    for epoch in range(1, config.epochs + 1):
        encoder.train()
        random.Random(config.seed * 1000 + epoch).shuffle(order)  # noqa: S311
        loss_sum, n = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            rows = order[start : start + config.batch_size]
            loss = step(rows)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite MLM loss at epoch {epoch}", epoch=epoch, batch_start=start
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            loss_sum += float(loss) * len(rows)
            n += len(rows)
        record: dict[str, float | int | str] = {
            "epoch": epoch,
            "split": "train",
            "loss": loss_sum / n,
        }
        result.history.append(record)
        if metrics_log is not None:
            metrics_log.append(record)
        logger.info("mlm_epoch", epoch=epoch, loss=record["loss"])
    encoder.eval()
    return result
