"""Transformer text encoder producing token embeddings e(S) and the pooled e^S."""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field, model_validator
from torch import nn

from layoutprior.textenc.tokenizer import TokenBatch

__all__ = ["EncoderConfig", "SelfAttention", "TransformerBlock", "Pooler", "TextEncoder"]


class EncoderConfig(BaseModel):
    """Shape of a text encoder; vocab_size 0 means "take it from the tokenizer"."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    vocab_size: int = Field(default=0, ge=0)
    hidden: int = Field(default=64, ge=1)
    layers: int = Field(default=2, ge=1)
    heads: int = Field(default=4, ge=1)
    ffn: int = Field(default=128, ge=1)
    max_len: int = Field(default=128, ge=8)
    type_vocab_size: int = Field(default=2, ge=1)
    dropout: float = Field(default=0.1, ge=0.0, lt=1.0)
    seed: int = 0

    @model_validator(mode="after")
    def _heads_divide_hidden(self) -> EncoderConfig:
        if self.hidden % self.heads:
            raise ValueError(f"hidden={self.hidden} not divisible by heads={self.heads}")
        return self

    def with_vocab(self, vocab_size: int) -> EncoderConfig:
        return self.model_copy(update={"vocab_size": vocab_size})


class SelfAttention(nn.Module):
    """Multi-head scaled dot-product self-attention with a key padding mask."""

    def __init__(self, hidden: int, heads: int, dropout: float) -> None:
        super().__init__()
        self.heads = heads
        self.head_dim = hidden // heads
        self.qkv = nn.Linear(hidden, 3 * hidden)
        self.out = nn.Linear(hidden, hidden)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        B, L, D = x.shape
        q, k, v = self.qkv(x).view(B, L, 3, self.heads, self.head_dim).permute(2, 0, 3, 1, 4)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(~mask[:, None, None, :], torch.finfo(scores.dtype).min)
        weights = self.dropout(F.softmax(scores, dim=-1))
        ctx = (weights @ v).transpose(1, 2).reshape(B, L, D)
        return self.out(ctx)


class TransformerBlock(nn.Module):
    """Post-norm block: attention + residual, feed-forward + residual."""

    def __init__(self, config: EncoderConfig) -> None:
        super().__init__()
        self.attn = SelfAttention(config.hidden, config.heads, config.dropout)
        self.attn_norm = nn.LayerNorm(config.hidden)
        self.ff_in = nn.Linear(config.hidden, config.ffn)
        self.ff_out = nn.Linear(config.ffn, config.hidden)
        self.ff_norm = nn.LayerNorm(config.hidden)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        x = self.attn_norm(x + self.dropout(self.attn(x, mask)))
        ff = self.ff_out(F.gelu(self.ff_in(x)))
        return self.ff_norm(x + self.dropout(ff))


class Pooler(nn.Module):
    """e^S = tanh(W e_0 + b) over the [CLS] position only."""

    def __init__(self, hidden: int) -> None:
        super().__init__()
        self.dense = nn.Linear(hidden, hidden)

    def forward(self, token_embeddings: torch.Tensor) -> torch.Tensor:
        if token_embeddings.shape[-2] == 0:
            raise ValueError("cannot pool an empty sequence")
        return torch.tanh(self.dense(token_embeddings[..., 0, :]))


class TextEncoder(nn.Module):
    """Token + position + segment embeddings followed by transformer blocks."""

    def __init__(self, config: EncoderConfig) -> None:
        super().__init__()
        if config.vocab_size < 1:
            raise ValueError("EncoderConfig.vocab_size must be set (use with_vocab)")
        self.config = config
        self.token_embedding = nn.Embedding(config.vocab_size, config.hidden)
        self.position_embedding = nn.Embedding(config.max_len, config.hidden)
        self.segment_embedding = nn.Embedding(config.type_vocab_size, config.hidden)
        self.embedding_norm = nn.LayerNorm(config.hidden)
        self.dropout = nn.Dropout(config.dropout)
        self.blocks = nn.ModuleList(TransformerBlock(config) for _ in range(config.layers))
        self.pooler = Pooler(config.hidden)
        self.reset_parameters(config.seed)

    def reset_parameters(self, seed: int) -> None:
        """normal(0, 0.02) weights, zero biases, unit LayerNorm gains."""
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for module in self.modules():
                if isinstance(module, nn.Linear | nn.Embedding):
                    module.weight.copy_(
                        torch.normal(0.0, 0.02, module.weight.shape, generator=gen)
                    )
                    if isinstance(module, nn.Linear) and module.bias is not None:
                        module.bias.zero_()
                elif isinstance(module, nn.LayerNorm):
                    module.weight.fill_(1.0)
                    module.bias.zero_()

    def forward(self, batch: TokenBatch) -> torch.Tensor:
        """Token embeddings e(S), shape (B, L, hidden)."""
        ids = batch.ids
        B, L = ids.shape
        if L > self.config.max_len:
            raise ValueError(f"sequence length {L} exceeds max_len {self.config.max_len}")
        if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= self.config.vocab_size):
            raise ValueError("token id out of vocab range")
        positions = torch.arange(L, device=ids.device).unsqueeze(0).expand(B, L)
        x = (
            self.token_embedding(ids)
            + self.position_embedding(positions)
            + self.segment_embedding(batch.segments)
        )
        x = self.dropout(self.embedding_norm(x))
        for block in self.blocks:
            x = block(x, batch.mask)
        return x

    def pool(self, token_embeddings: torch.Tensor) -> torch.Tensor:
        return self.pooler(token_embeddings)

    def encode(self, batch: TokenBatch) -> tuple[torch.Tensor, torch.Tensor]:
        """(e(S), e^S) in one call."""
        tokens = self(batch)
        return tokens, self.pool(tokens)
