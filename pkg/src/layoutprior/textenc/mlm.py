"""Masked-language-model objective, used only for the caption-MLM ablation encoder."""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from layoutprior.textenc.encoder import TextEncoder
from layoutprior.textenc.tokenizer import TokenBatch

__all__ = ["IGNORE_INDEX", "MaskedLMHead", "masked_count", "mask_tokens", "mlm_loss", "mlm_step"]

IGNORE_INDEX = -100


class MaskedLMHead(nn.Module):
    """Transform + vocabulary projection; kept outside the encoder's parameters."""

    def __init__(self, hidden: int, vocab_size: int, seed: int = 0) -> None:
        super().__init__()
        self.dense = nn.Linear(hidden, hidden)
        self.norm = nn.LayerNorm(hidden)
        self.decoder = nn.Linear(hidden, vocab_size)
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for layer in (self.dense, self.decoder):
                layer.weight.copy_(torch.normal(0.0, 0.02, layer.weight.shape, generator=gen))
                layer.bias.zero_()

    def forward(self, token_embeddings: torch.Tensor) -> torch.Tensor:
        return self.decoder(self.norm(F.gelu(self.dense(token_embeddings))))


def masked_count(maskable: int, mask_rate: float) -> int:
    """ceil(mask_rate * maskable), robust to float products like 0.15 * 20."""
    return min(maskable, math.ceil(mask_rate * maskable - 1e-9))


def mask_tokens(
    batch: TokenBatch,
    mask_rate: float,
    *,
    mask_id: int,
    special_ids: frozenset[int],
    generator: torch.Generator,
) -> tuple[TokenBatch, torch.Tensor]:
    """Replace ceil(rate * n) non-special positions per row with [MASK].

    Returns the masked batch and labels holding the original ids at masked
    positions and IGNORE_INDEX elsewhere.
    """
    if not 0.0 < mask_rate < 1.0:
        raise ValueError("mask_rate must lie in (0, 1)")
    ids = batch.ids.clone()
    labels = torch.full_like(ids, IGNORE_INDEX)
    special = torch.tensor(sorted(special_ids), dtype=ids.dtype)
    maskable = batch.mask & ~torch.isin(batch.ids, special)
    for row in range(ids.shape[0]):
        candidates = maskable[row].nonzero(as_tuple=True)[0]
        if candidates.numel() == 0:
            raise ValueError(f"sequence {row} has no maskable position")
        k = masked_count(int(candidates.numel()), mask_rate)
        chosen = candidates[torch.randperm(candidates.numel(), generator=generator)[:k]]
        labels[row, chosen] = ids[row, chosen]
        ids[row, chosen] = mask_id
    return TokenBatch(ids=ids, segments=batch.segments, mask=batch.mask), labels


def mlm_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean cross-entropy over masked positions."""
    return F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), labels.reshape(-1), ignore_index=IGNORE_INDEX
    )


def mlm_step(
    encoder: TextEncoder,
    head: MaskedLMHead,
    batch: TokenBatch,
    mask_rate: float,
    *,
    mask_id: int,
    special_ids: frozenset[int],
    generator: torch.Generator,
) -> torch.Tensor:
    """Mask, encode and score one batch; returns the scalar loss."""
    masked, labels = mask_tokens(
        batch, mask_rate, mask_id=mask_id, special_ids=special_ids, generator=generator
    )
    return mlm_loss(head(encoder(masked)), labels)
