"""Central-difference verification of analytic gradients.

Runs at 64-bit with dropout disabled. A sampled subset of individual
weights is perturbed by +/- epsilon and the finite difference of the loss
is compared with the autograd value.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal

import torch
from torch import nn

from layoutprior.layout.batching import LayoutBatch
from layoutprior.layout.decoder import LayoutGenerator
from layoutprior.layout.training import batch_layout_loss

__all__ = [
    "LayoutPart",
    "GradCheckReport",
    "relative_error",
    "max_relative_error",
    "part_parameters",
    "grad_check",
    "descent_check",
]

LayoutPart = Literal["encoder", "convgru", "label_head", "box_head", "full"]

# |a - n| / max(|a|, |n|, floor); the floor keeps roundoff on vanishing gradients from counting
_REL_FLOOR = 1e-7


@dataclass(frozen=True)
class GradCheckReport:
    part: str
    max_rel_error: float
    checked: int
    worst: str


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), _REL_FLOOR)


def max_relative_error(
    loss_fn: Callable[[], torch.Tensor],
    params: Sequence[tuple[str, nn.Parameter]],
    *,
    epsilon: float = 1e-5,
    samples: int = 200,
    seed: int = 0,
) -> GradCheckReport:
    """Compare autograd with (f(w + eps) - f(w - eps)) / 2 eps on sampled weights.

    Every weight is checked when the parameters hold no more than *samples*.
    """
    for _, p in params:
        if p.dtype != torch.float64:
            raise ValueError("gradient checks need float64 parameters")
    for _, p in params:
        p.grad = None
    loss_fn().backward()
    analytic = [
        p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p) for _, p in params
    ]

    sizes = [p.numel() for _, p in params]
    total = sum(sizes)
    if total == 0:
        raise ValueError("no parameters to check")
    if total <= samples:
        picks = torch.arange(total)
    else:
        gen = torch.Generator().manual_seed(seed)
        picks = torch.randperm(total, generator=gen)[:samples].sort().values
    offsets = torch.tensor([0, *sizes]).cumsum(0)

    worst, worst_name = 0.0, ""
    with torch.no_grad():
        for flat in picks.tolist():
            which = int(torch.searchsorted(offsets, flat, right=True)) - 1
            name, p = params[which]
            idx = flat - int(offsets[which])
            view = p.view(-1)
            original = float(view[idx])
            view[idx] = original + epsilon
            plus = float(loss_fn())
            view[idx] = original - epsilon
            minus = float(loss_fn())
            view[idx] = original
            numeric = (plus - minus) / (2 * epsilon)
            err = relative_error(float(analytic[which].view(-1)[idx]), numeric)
            if err > worst:
                worst, worst_name = err, f"{name}[{idx}]"
    return GradCheckReport(part="", max_rel_error=worst, checked=len(picks), worst=worst_name)


def part_parameters(model: LayoutGenerator, part: LayoutPart) -> list[tuple[str, nn.Parameter]]:
    groups: dict[str, list[str]] = {
        "encoder": ["text_encoder"],
        "convgru": ["layout_encoder"],
        "label_head": ["label_embedding", "label_spatial", "label_text", "label_mlp"],
        "box_head": ["box_text", "box_spatial", "box_mlp"],
    }
    if part == "full":
        return list(model.named_parameters())
    if part not in groups:
        raise ValueError(f"unknown model part {part!r}")
    prefixes = tuple(f"{g}." for g in groups[part])
    return [(n, p) for n, p in model.named_parameters() if n.startswith(prefixes)]


def grad_check(
    model: LayoutGenerator,
    batch: LayoutBatch,
    part: LayoutPart = "full",
    *,
    epsilon: float = 1e-5,
    samples: int = 200,
    seed: int = 0,
) -> GradCheckReport:
    """Max relative gradient error of the layout loss w.r.t. one model part."""
    model.double().eval()
    if batch.dtype != torch.float64:
        raise ValueError("build the batch with dtype=torch.float64")

    def loss_fn() -> torch.Tensor:
        logits, boxes = model(batch.captions, batch.labels, batch.raster_at)
        return batch_layout_loss(logits, boxes, batch)

    report = max_relative_error(
        loss_fn, part_parameters(model, part), epsilon=epsilon, samples=samples, seed=seed
    )
    return GradCheckReport(
        part=part, max_rel_error=report.max_rel_error, checked=report.checked, worst=report.worst
    )


def descent_check(
    model: LayoutGenerator, batch: LayoutBatch, step: float = 1e-4
) -> tuple[float, float]:
    """Loss before and after one plain gradient step of size *step*."""
    model.eval()
    model.zero_grad()
    logits, boxes = model(batch.captions, batch.labels, batch.raster_at)
    before = batch_layout_loss(logits, boxes, batch)
    before.backward()
    with torch.no_grad():
        for p in model.parameters():
            if p.grad is not None:
                p -= step * p.grad
        logits, boxes = model(batch.captions, batch.labels, batch.raster_at)
        after = batch_layout_loss(logits, boxes, batch)
    return float(before), float(after)
