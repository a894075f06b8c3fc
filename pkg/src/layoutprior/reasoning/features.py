"""Frozen knowledge-encoder features E2, computed once per (question, choice)."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import torch

from layoutprior.artifacts.digest import param_digest
from layoutprior.data.types import MCQuestion
from layoutprior.errors import ConfigMismatchError
from layoutprior.logging import get_logger
from layoutprior.reasoning.formatting import encode_questions, uniform_arity
from layoutprior.textenc.encoder import EncoderConfig, TextEncoder
from layoutprior.textenc.tokenizer import Tokenizer

__all__ = [
    "EncoderVariant",
    "KnowledgeEncoder",
    "KnowledgeCache",
    "check_encoder_config",
    "precompute_knowledge",
]

logger = get_logger()


class EncoderVariant(StrEnum):
    NONE = "none"
    VIBERT = "vibert"
    FROZEN_INIT = "frozen-init"
    CAPTION_MLM = "caption-mlm"

    @classmethod
    def parse(cls, value: str) -> EncoderVariant:
        """Accepts both ``frozen-init`` and ``frozen_init`` spellings."""
        return cls(value.strip().lower().replace("_", "-"))


@dataclass
class KnowledgeEncoder:
    """A text encoder used purely as a feature extractor."""

    variant: EncoderVariant
    encoder: TextEncoder
    tokenizer: Tokenizer

    def __post_init__(self) -> None:
        self.encoder.eval()
        self.encoder.requires_grad_(False)

    @property
    def dim(self) -> int:
        return self.encoder.config.hidden

    def digest(self) -> str:
        return param_digest(self.encoder)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.encoder.parameters())


def check_encoder_config(found: EncoderConfig, expected: EncoderConfig, *, source: str) -> None:
    """Architectures must agree; the init seed of a trained encoder is irrelevant."""
    a = found.model_dump(exclude={"seed"})
    b = expected.model_dump(exclude={"seed"})
    if a != b:
        diff = {k: (a[k], b[k]) for k in a if a[k] != b[k]}
        raise ConfigMismatchError(
            f"{source}: encoder config differs from the run's: {diff}", differences=diff
        )


@dataclass
class KnowledgeCache:
    """question id -> (n_choices, d_v) features."""

    features: dict[str, torch.Tensor] = field(default_factory=dict)

    def gather(self, questions: Sequence[MCQuestion]) -> torch.Tensor:
        """Stacked question-major rows (Q * n, d_v)."""
        missing = [q.id for q in questions if q.id not in self.features]
        if missing:
            raise KeyError(f"no cached knowledge features for {missing[:5]}")
        return torch.cat([self.features[q.id] for q in questions], dim=0)


@torch.no_grad()
def precompute_knowledge(
    knowledge: KnowledgeEncoder,
    questions: Sequence[MCQuestion],
    *,
    max_len: int = 128,
    prefix: bool | None = None,
    batch_size: int = 64,
    cache: KnowledgeCache | None = None,
) -> KnowledgeCache:
    """Pooled encoder vectors in evaluation mode, without gradients."""
    cache = cache or KnowledgeCache()
    todo = [q for q in questions if q.id not in cache.features]
    if not todo:
        return cache
    n = uniform_arity(todo)
    knowledge.encoder.eval()
    max_len = min(max_len, knowledge.encoder.config.max_len)
    for start in range(0, len(todo), batch_size):
        chunk = todo[start : start + batch_size]
        pairs = encode_questions(chunk, knowledge.tokenizer, max_len=max_len, prefix=prefix)
        _, pooled = knowledge.encoder.encode(pairs)
        for i, q in enumerate(chunk):
            cache.features[q.id] = pooled[i * n : (i + 1) * n].clone()
    logger.info("knowledge_features_cached", variant=str(knowledge.variant), questions=len(todo))
    return cache
