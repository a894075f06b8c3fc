"""Attention modules of the box decoder.

TextAttention is Luong's "general" form: score_i = q^T W e_i, softmax over
the non-pad tokens. SpatialAttention puts a single-query softmax over the
flattened state grid, reweights the feature map with it and reads the
result out through a small strided convolution and a flatten.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

__all__ = ["masked_softmax", "TextAttention", "SpatialAttention"]


def masked_softmax(scores: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Softmax over the last axis with masked entries at exactly zero."""
    return F.softmax(scores.masked_fill(~mask, torch.finfo(scores.dtype).min), dim=-1)


class TextAttention(nn.Module):
    def __init__(self, query_dim: int, key_dim: int) -> None:
        super().__init__()
        self.proj = nn.Linear(key_dim, query_dim, bias=False)

    def forward(
        self, query: torch.Tensor, keys: torch.Tensor, mask: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """query (B, Q), keys (B, L, K), mask (B, L) -> context (B, K), weights (B, L)."""
        scores = torch.einsum("bq,blq->bl", query, self.proj(keys))
        weights = masked_softmax(scores, mask)
        context = torch.einsum("bl,blk->bk", weights, keys)
        return context, weights


class SpatialAttention(nn.Module):
    def __init__(
        self, query_dim: int, channels: int, grid: int, out_dim: int, conv_channels: int = 16
    ) -> None:
        super().__init__()
        self.query = nn.Linear(query_dim, channels)
        self.conv = nn.Conv2d(channels, conv_channels, 3, stride=2, padding=1)
        reduced = (grid + 1) // 2
        self.readout = nn.Linear(conv_channels * reduced * reduced, out_dim)
        self.scale = 1.0 / math.sqrt(channels)

    def forward(
        self, query: torch.Tensor, state: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """query (B, Q), state (B, Ch, G, G) -> u (B, out_dim), weights (B, G*G)."""
        B, Ch, gw, gh = state.shape
        flat = state.reshape(B, Ch, gw * gh)
        scores = torch.einsum("bc,bcn->bn", self.query(query), flat) * self.scale
        weights = F.softmax(scores, dim=-1)
        # uniform weights leave the map unchanged
        attended = state * (weights * (gw * gh)).view(B, 1, gw, gh)
        u = torch.tanh(self.readout(F.gelu(self.conv(attended)).flatten(1)))
        return u, weights
