"""Caption-conditioned autoregressive labeled-box decoder.

One decoding step t, given the caption encoding (e(S), e^S) and the layout
state e^I_t:

    u^l = phi^l(e^I_t, e^S)                 spatial attention, pooled caption as query
    c^l = varphi^l([u^l ; hist], e(S))      text attention
    p(l_t) = softmax(g(u^l, c^l))           two-layer perceptron over C + 1 classes
    c^b = varphi^b([u^l ; emb(l_t)], e(S))  text attention on the chosen object
    u^b = phi^b(e^I_t, c^b)                 spatial attention for its position
    b_t = sigmoid(theta(c^b, u^b))          box regression in [0, 1]^4

``hist`` is the mean label embedding of l_{1:t-1} (zero when empty).
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field
from torch import nn

from layoutprior.layout.attention import SpatialAttention, TextAttention
from layoutprior.layout.convgru import LayoutEncoder, glorot_init_
from layoutprior.textenc.encoder import EncoderConfig, TextEncoder
from layoutprior.textenc.tokenizer import TokenBatch

__all__ = [
    "LayoutModelConfig",
    "LabelStep",
    "BoxStep",
    "DecoderStep",
    "LayoutGenerator",
    "history_summaries",
]


class LayoutModelConfig(BaseModel):
    """Layout-side shapes; num_classes 0 means "take C from the label vocab"."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    num_classes: int = Field(default=0, ge=0)
    raster: int = Field(default=64, ge=1)
    state_grid: int = Field(default=16, ge=1)
    state_channels: int = Field(default=64, ge=1)
    label_embedding: int = Field(default=32, ge=1)
    attention_dim: int = Field(default=128, ge=1)
    conv_channels: int = Field(default=16, ge=1)
    head_hidden: int = Field(default=128, ge=1)
    seed: int = 0

    def with_classes(self, num_classes: int) -> LayoutModelConfig:
        return self.model_copy(update={"num_classes": num_classes})


@dataclass(frozen=True)
class LabelStep:
    logits: torch.Tensor  # (B, C + 1)
    u: torch.Tensor
    c: torch.Tensor
    spatial_weights: torch.Tensor  # (B, G * G)
    text_weights: torch.Tensor  # (B, L)

    @property
    def dist(self) -> torch.Tensor:
        return F.softmax(self.logits, dim=-1)


@dataclass(frozen=True)
class BoxStep:
    box: torch.Tensor  # (B, 4), each in [0, 1]
    u: torch.Tensor
    c: torch.Tensor
    spatial_weights: torch.Tensor
    text_weights: torch.Tensor


@dataclass(frozen=True)
class DecoderStep:
    """One full step; box is None when the end class was chosen."""

    label: LabelStep
    box: BoxStep | None


def history_summaries(
    embedding: nn.Embedding, labels: torch.Tensor
) -> torch.Tensor:
    """Mean embedding of labels[:, :t] for every t, zero at t = 0.

    labels (B, T) -> (B, T, d).
    """
    B, T = labels.shape
    emb = embedding(labels)
    prefix = torch.cumsum(emb, dim=1) - emb  # sum over strictly earlier steps
    counts = torch.arange(T, dtype=emb.dtype).clamp(min=1).view(1, T, 1)
    return prefix / counts


class LayoutGenerator(nn.Module):
    """Text encoder + ConvGRU layout encoder + label/box heads."""

    def __init__(self, encoder_config: EncoderConfig, config: LayoutModelConfig) -> None:
        super().__init__()
        if config.num_classes < 1:
            raise ValueError("LayoutModelConfig.num_classes must be set (use with_classes)")
        self.config = config
        self.num_classes = config.num_classes
        self.end_index = config.num_classes
        d_t = encoder_config.hidden
        d_u = config.attention_dim
        d_lab = config.label_embedding

        self.text_encoder = TextEncoder(encoder_config)
        self.layout_encoder = LayoutEncoder(
            config.num_classes, config.state_channels, config.raster, config.state_grid
        )
        self.label_embedding = nn.Embedding(config.num_classes + 1, d_lab)

        self.label_spatial = SpatialAttention(
            d_t, config.state_channels, config.state_grid, d_u, config.conv_channels
        )
        self.label_text = TextAttention(d_u + d_lab, d_t)
        self.label_mlp = nn.Sequential(
            nn.Linear(d_u + d_t, config.head_hidden),
            nn.GELU(),
            nn.Linear(config.head_hidden, config.num_classes + 1),
        )

        self.box_text = TextAttention(d_u + d_lab, d_t)
        self.box_spatial = SpatialAttention(
            d_t, config.state_channels, config.state_grid, d_u, config.conv_channels
        )
        self.box_mlp = nn.Sequential(
            nn.Linear(d_t + d_u, config.head_hidden),
            nn.GELU(),
            nn.Linear(config.head_hidden, 4),
        )
        self.reset_layout_parameters(config.seed)

    def reset_layout_parameters(self, seed: int) -> None:
        """Seeded init of everything except the text encoder."""
        gen = torch.Generator().manual_seed(seed)
        for part in self.layout_parts().values():
            glorot_init_(part, gen)
        with torch.no_grad():
            self.label_embedding.weight.copy_(
                torch.normal(0.0, 0.02, self.label_embedding.weight.shape, generator=gen)
            )

    def layout_parts(self) -> dict[str, nn.Module]:
        return {
            "layout_encoder": self.layout_encoder,
            "label_spatial": self.label_spatial,
            "label_text": self.label_text,
            "label_mlp": self.label_mlp,
            "box_text": self.box_text,
            "box_spatial": self.box_spatial,
            "box_mlp": self.box_mlp,
        }

    # ── step API ─────────────────────────────────────────────────

    def encode_caption(self, batch: TokenBatch) -> tuple[torch.Tensor, torch.Tensor]:
        return self.text_encoder.encode(batch)

    def initial_state(self, batch_size: int) -> torch.Tensor:
        return self.layout_encoder.initial_state(batch_size)

    def layout_step_encode(self, raster: torch.Tensor, prev_state: torch.Tensor) -> torch.Tensor:
        return self.layout_encoder(raster, prev_state)  # type: ignore[no-any-return]

    def decode_label(
        self,
        state: torch.Tensor,
        pooled: torch.Tensor,
        tokens: torch.Tensor,
        mask: torch.Tensor,
        history: torch.Tensor,
    ) -> LabelStep:
        u, spatial_w = self.label_spatial(pooled, state)
        c, text_w = self.label_text(torch.cat([u, history], dim=-1), tokens, mask)
        logits = self.label_mlp(torch.cat([u, c], dim=-1))
        return LabelStep(logits=logits, u=u, c=c, spatial_weights=spatial_w, text_weights=text_w)

    def decode_box(
        self,
        state: torch.Tensor,
        tokens: torch.Tensor,
        mask: torch.Tensor,
        u_label: torch.Tensor,
        label: torch.Tensor,
    ) -> BoxStep:
        if int(label.min()) < 0 or int(label.max()) > self.end_index:
            raise ValueError("label index outside [0, C]")
        query = torch.cat([u_label, self.label_embedding(label)], dim=-1)
        c, text_w = self.box_text(query, tokens, mask)
        u, spatial_w = self.box_spatial(c, state)
        box = torch.sigmoid(self.box_mlp(torch.cat([c, u], dim=-1)))
        return BoxStep(box=box, u=u, c=c, spatial_weights=spatial_w, text_weights=text_w)

    # ── teacher forcing ──────────────────────────────────────────

    def forward(
        self,
        captions: TokenBatch,
        target_labels: torch.Tensor,
        raster_at: Callable[[int], torch.Tensor],
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Teacher-forced pass.

        raster_at(t) returns I_{t-1} (B, C, W, H) built from ground truth only;
        target_labels (B, T) condition the box head and the label history.
        Returns label logits (B, T, C + 1) and boxes (B, T, 4).
        """
        B, T = target_labels.shape
        tokens, pooled = self.encode_caption(captions)
        history = history_summaries(self.label_embedding, target_labels)
        state = self.initial_state(B).to(tokens.dtype)
        all_logits, all_boxes = [], []
        for t in range(T):
            state = self.layout_step_encode(raster_at(t).to(tokens.dtype), state)
            label_step = self.decode_label(state, pooled, tokens, captions.mask, history[:, t])
            box_step = self.decode_box(
                state, tokens, captions.mask, label_step.u, target_labels[:, t]
            )
            all_logits.append(label_step.logits)
            all_boxes.append(box_step.box)
        return torch.stack(all_logits, dim=1), torch.stack(all_boxes, dim=1)
