"""score(a) = h([E1 ; M^T E2]) and the multiple-choice model around it."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from layoutprior.textenc.encoder import EncoderConfig, TextEncoder
from layoutprior.textenc.tokenizer import TokenBatch

__all__ = ["ReasonerHead", "MultipleChoiceReasoner", "choice_probabilities"]


class ReasonerHead(nn.Module):
    """Projection M (d_v x d_lm) and linear scorer h.

    Without a knowledge encoder there is no M and h reads E1 alone.
    """

    def __init__(self, lm_dim: int, knowledge_dim: int | None, *, seed: int = 0) -> None:
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.lm_dim = lm_dim
        self.knowledge_dim = knowledge_dim
        self.M: nn.Parameter | None
        if knowledge_dim is not None:
            self.M = nn.Parameter(torch.normal(0.0, 0.02, (knowledge_dim, lm_dim), generator=gen))
        else:
            self.register_parameter("M", None)
        in_dim = 2 * lm_dim if knowledge_dim is not None else lm_dim
        self.h = nn.Linear(in_dim, 1)
        with torch.no_grad():
            self.h.weight.copy_(torch.normal(0.0, 0.02, self.h.weight.shape, generator=gen))
            self.h.bias.zero_()

    def forward(self, e1: torch.Tensor, e2: torch.Tensor | None = None) -> torch.Tensor:
        """(..., d_lm) and (..., d_v) -> scores (...)."""
        if e1.shape[-1] != self.lm_dim:
            raise ValueError(f"E1 has width {e1.shape[-1]}, expected {self.lm_dim}")
        if self.M is None:
            if e2 is not None:
                raise ValueError("head was built without a knowledge projection")
            return self.h(e1).squeeze(-1)  # type: ignore[no-any-return]
        if e2 is None or e2.shape[-1] != self.M.shape[0]:
            raise ValueError(f"E2 must have width {self.M.shape[0]}")
        projected = e2.to(self.M.dtype) @ self.M
        joint = torch.cat([e1, projected], dim=-1)
        return self.h(joint).squeeze(-1)  # type: ignore[no-any-return]


def choice_probabilities(scores: torch.Tensor) -> torch.Tensor:
    """Softmax across each question's own choices (last axis)."""
    return F.softmax(scores, dim=-1)


class MultipleChoiceReasoner(nn.Module):
    """The fine-tuned LM producing E1 plus the scoring head.

    The frozen knowledge encoder is not a submodule; its features arrive
    precomputed.
    """

    def __init__(
        self, lm_config: EncoderConfig, knowledge_dim: int | None, *, seed: int = 0
    ) -> None:
        super().__init__()
        self.lm = TextEncoder(lm_config)
        self.head = ReasonerHead(lm_config.hidden, knowledge_dim, seed=seed)

    def forward(
        self, pairs: TokenBatch, knowledge: torch.Tensor | None, num_choices: int
    ) -> torch.Tensor:
        """Rows are question-major pairs; returns scores (Q, num_choices)."""
        if len(pairs) % num_choices:
            raise ValueError(f"{len(pairs)} pairs do not split into {num_choices} choices")
        _, e1 = self.lm.encode(pairs)
        scores = self.head(e1, knowledge)
        return scores.view(-1, num_choices)
