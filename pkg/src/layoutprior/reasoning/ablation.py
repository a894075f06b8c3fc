"""Knowledge-encoder variants and the side-by-side comparison over them."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

from layoutprior.artifacts.digest import count_parameters
from layoutprior.artifacts.metrics_log import MetricsLogProtocol
from layoutprior.artifacts.models import load_encoder
from layoutprior.data.types import MCQuestion
from layoutprior.errors import CheckpointError, ConfigError, ParameterParityError
from layoutprior.logging import get_logger
from layoutprior.reasoning.features import EncoderVariant, KnowledgeEncoder, check_encoder_config
from layoutprior.reasoning.head import MultipleChoiceReasoner
from layoutprior.reasoning.training import QATrainConfig, finetune_restarts
from layoutprior.textenc.encoder import EncoderConfig, TextEncoder
from layoutprior.textenc.tokenizer import Tokenizer

__all__ = [
    "AblationRow",
    "AblationTable",
    "build_knowledge_encoder",
    "parameter_counts",
    "check_parity",
    "run_ablation",
]

logger = get_logger()

_EXPECTED_KIND = {
    EncoderVariant.VIBERT: "layout",
    EncoderVariant.CAPTION_MLM: "encoder",
}


def build_knowledge_encoder(
    variant: EncoderVariant,
    encoder_config: EncoderConfig,
    *,
    checkpoint: str | Path | None = None,
    tokenizer: Tokenizer | None = None,
    seed: int = 0,
) -> KnowledgeEncoder | None:
    """The frozen encoder behind *variant*, checked against the run's encoder config.

    frozen-init is a fresh encoder at its seeded initial weights and needs the
    tokenizer it should share with the trained variants.
    """
    if variant is EncoderVariant.NONE:
        return None
    if variant is EncoderVariant.FROZEN_INIT:
        if tokenizer is None:
            raise ConfigError("frozen-init needs a tokenizer to size its vocabulary")
        config = encoder_config.with_vocab(len(tokenizer)).model_copy(update={"seed": seed})
        return KnowledgeEncoder(variant, TextEncoder(config), tokenizer)
    if checkpoint is None:
        raise ConfigError(f"variant {variant} needs an encoder checkpoint")
    loaded = load_encoder(checkpoint)
    if loaded.manifest.kind != _EXPECTED_KIND[variant]:
        raise CheckpointError(
            f"{checkpoint}: variant {variant} expects a {_EXPECTED_KIND[variant]} checkpoint, "
            f"got {loaded.manifest.kind}"
        )
    check_encoder_config(
        loaded.encoder.config,
        encoder_config.with_vocab(len(loaded.tokenizer)),
        source=str(checkpoint),
    )
    return KnowledgeEncoder(variant, loaded.encoder, loaded.tokenizer)


def parameter_counts(
    lm_config: EncoderConfig, tokenizer: Tokenizer, knowledge: KnowledgeEncoder | None
) -> tuple[int, int]:
    """(trainable, frozen) parameter counts of one variant's full model."""
    model = MultipleChoiceReasoner(
        lm_config.with_vocab(len(tokenizer)), knowledge.dim if knowledge is not None else None
    )
    frozen = knowledge.parameter_count() if knowledge is not None else 0
    return count_parameters(model), frozen


def check_parity(counts: Mapping[EncoderVariant, tuple[int, int]]) -> None:
    """All variants with a knowledge encoder must have equal total parameter counts."""
    totals = {v: sum(c) for v, c in counts.items() if v is not EncoderVariant.NONE}
    if len(set(totals.values())) > 1:
        raise ParameterParityError(
            f"parameter counts differ across variants: {totals}",
            counts={str(v): n for v, n in totals.items()},
        )


@dataclass(frozen=True)
class AblationRow:
    variant: str
    params: int
    trainable_params: int
    frozen_params: int
    dev_accuracy: float
    seeds: list[int]
    accuracies: list[float]
    mean: float
    stddev: float


@dataclass(frozen=True)
class AblationTable:
    rows: list[AblationRow]

    def to_json(self) -> dict[str, Any]:
        variants = {}
        for row in self.rows:
            entry = asdict(row)
            variants[entry.pop("variant")] = entry
        return {"variants": variants, "parameter_parity": True}


def run_ablation(
    train: Sequence[MCQuestion],
    dev: Sequence[MCQuestion],
    tokenizer: Tokenizer,
    lm_config: EncoderConfig,
    knowledge: Mapping[EncoderVariant, KnowledgeEncoder | None],
    config: QATrainConfig,
    seeds: Sequence[int],
    *,
    metrics_log: MetricsLogProtocol | None = None,
) -> AblationTable:
    """Fine-tune and evaluate every variant over the same seeds.

    Parity is checked before any training starts.
    """
    if not knowledge:
        raise ValueError("no variants to compare")
    counts = {v: parameter_counts(lm_config, tokenizer, k) for v, k in knowledge.items()}
    check_parity(counts)

    rows = []
    for variant, encoder in knowledge.items():
        logger.info("ablation_variant", variant=str(variant), seeds=list(seeds))
        summary, _ = finetune_restarts(
            seeds, train, dev, tokenizer, lm_config, encoder, config, metrics_log=metrics_log
        )
        trainable, frozen = counts[variant]
        rows.append(
            AblationRow(
                variant=str(variant),
                params=trainable + frozen,
                trainable_params=trainable,
                frozen_params=frozen,
                dev_accuracy=summary.best,
                seeds=summary.seeds,
                accuracies=summary.accuracies,
                mean=summary.mean,
                stddev=summary.stddev,
            )
        )
    return AblationTable(rows)
