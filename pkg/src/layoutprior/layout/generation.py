"""Greedy autoregressive layout generation from a caption."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import torch

from layoutprior.data.synthetic import parse_caption, relation_holds
from layoutprior.data.types import BOX_EPS, LabeledBox, LabelVocab
from layoutprior.layout.decoder import DecoderStep, LayoutGenerator
from layoutprior.layout.raster import rasterize_batch
from layoutprior.logging import get_logger
from layoutprior.textenc.tokenizer import Tokenizer, pad_batch

__all__ = [
    "GeneratedLayout",
    "clamp_prediction",
    "generate",
    "generate_steps",
    "relation_accuracy",
]

logger = get_logger()


@dataclass(frozen=True)
class GeneratedLayout:
    boxes: tuple[LabeledBox, ...]
    terminated: bool
    steps: tuple[DecoderStep, ...] = field(default=(), repr=False, compare=False)


def clamp_prediction(label: int, x: float, y: float, w: float, h: float) -> LabeledBox:
    """Keep the predicted extent and shift the corner so the box fits the canvas."""
    w = min(max(w, BOX_EPS), 1.0)
    h = min(max(h, BOX_EPS), 1.0)
    return LabeledBox(
        label=label,
        x=min(max(x, 0.0), 1.0 - w),
        y=min(max(y, 0.0), 1.0 - h),
        w=w,
        h=h,
    )


@torch.no_grad()
def generate_steps(
    model: LayoutGenerator,
    tokenizer: Tokenizer,
    caption: str,
    *,
    max_steps: int = 20,
) -> GeneratedLayout:
    """Run the recurrence and keep every DecoderStep for inspection."""
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    was_training = model.training
    model.eval()
    try:
        max_len = model.text_encoder.config.max_len
        captions = pad_batch([tokenizer.tokenize(caption, max_len)], tokenizer.pad_id)
        tokens, pooled = model.encode_caption(captions)
        dtype = tokens.dtype
        cfg = model.config
        state = model.initial_state(1).to(dtype)
        boxes: list[LabeledBox] = []
        steps: list[DecoderStep] = []
        label_emb_sum = torch.zeros(1, cfg.label_embedding, dtype=dtype)
        for t in range(max_steps + 1):
            raster = rasterize_batch([boxes], cfg.num_classes, cfg.raster, cfg.raster, dtype=dtype)
            state = model.layout_step_encode(raster, state)
            history = label_emb_sum / max(t, 1)
            label_step = model.decode_label(state, pooled, tokens, captions.mask, history)
            label = int(label_step.logits.argmax(dim=-1))
            if label == model.end_index:
                steps.append(DecoderStep(label=label_step, box=None))
                return GeneratedLayout(tuple(boxes), terminated=True, steps=tuple(steps))
            if t == max_steps:
                break
            label_t = torch.tensor([label])
            box_step = model.decode_box(state, tokens, captions.mask, label_step.u, label_t)
            steps.append(DecoderStep(label=label_step, box=box_step))
            x, y, w, h = (float(v) for v in box_step.box[0])
            boxes.append(clamp_prediction(label, x, y, w, h))
            label_emb_sum = label_emb_sum + model.label_embedding(label_t)
        logger.debug("generation_capped", caption=caption, max_steps=max_steps)
        return GeneratedLayout(tuple(boxes), terminated=False, steps=tuple(steps))
    finally:
        model.train(was_training)


def generate(
    model: LayoutGenerator,
    tokenizer: Tokenizer,
    caption: str,
    *,
    max_steps: int = 20,
    mode: str = "greedy",
) -> GeneratedLayout:
    """Greedy decoding; stops on the end class or after max_steps boxes."""
    if mode != "greedy":
        raise ValueError(f"unsupported generation mode {mode!r}")
    return generate_steps(model, tokenizer, caption, max_steps=max_steps)


def relation_accuracy(
    model: LayoutGenerator,
    tokenizer: Tokenizer,
    vocab: LabelVocab,
    captions: Sequence[str],
    *,
    max_steps: int = 20,
) -> float:
    """Share of grammar captions whose greedy layout honours the relation word."""
    facts = [f for f in (parse_caption(c) for c in captions) if f is not None]
    if not facts:
        raise ValueError("no grammar captions to check")
    hits = 0
    for fact in facts:
        layout = generate(model, tokenizer, fact.caption, max_steps=max_steps)
        hits += relation_holds(fact, layout.boxes, vocab)
    return hits / len(facts)
