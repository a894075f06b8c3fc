"""Deterministic scene-grammar corpus used as the desk-scale learning oracle.

Captions follow one template, ``a <size> <A> <relation> a <size> <B>``, and
the layout is a pure function of the caption: boxes snap to a G x G grid,
the relation word fixes which side each object sits on and the size word
fixes its extent. Which classes appear together is governed by a
co-occurrence ring (each class only ever appears next to its two ring
neighbours), which is what the synthetic QA questions test.
"""

from __future__ import annotations

import random
import re
from enum import StrEnum
from typing import TYPE_CHECKING

from pydantic import BaseModel, ConfigDict, Field, model_validator

from layoutprior.data.layouts import canonical_order
from layoutprior.data.types import LabeledBox, LabelVocab, MCQuestion, QAStyle, Scene

if TYPE_CHECKING:
    from collections.abc import Sequence

__all__ = [
    "CLASS_NAMES",
    "Relation",
    "Size",
    "GrammarConfig",
    "GrammarFact",
    "parse_caption",
    "layout_for",
    "relation_holds",
    "synth_grammar_generate",
    "synth_qa_generate",
]

CLASS_NAMES: tuple[str, ...] = (
    "cat", "dog", "sofa", "tree", "car", "bus", "person", "chair",
    "bird", "horse", "bench", "kite", "boat", "train", "bottle", "cup",
    "laptop", "clock", "umbrella", "sheep", "cow", "truck", "bicycle", "vase",
)  # fmt: skip


class Relation(StrEnum):
    LEFT_OF = "left of"
    RIGHT_OF = "right of"
    ABOVE = "above"
    BELOW = "below"


class Size(StrEnum):
    SMALL = "small"
    LARGE = "large"


class GrammarConfig(BaseModel):
    """Synthetic grammar parameters (K classes on a G x G grid)."""

    model_config = ConfigDict(extra="forbid")

    num_classes: int = Field(default=8, ge=3, le=len(CLASS_NAMES))
    grid: int = Field(default=8, ge=4)
    relations: tuple[Relation, ...] = tuple(Relation)
    sizes: tuple[Size, ...] = tuple(Size)
    num_choices: int = Field(default=5, ge=2)
    seed: int = 7

    @model_validator(mode="after")
    def _enough_distractors(self) -> GrammarConfig:
        # a class, its two ring neighbours, and num_choices - 1 distractors
        if self.num_classes < self.num_choices + 2:
            raise ValueError(
                f"num_classes={self.num_classes} leaves too few non-co-occurring "
                f"distractors for num_choices={self.num_choices}"
            )
        if not self.relations or not self.sizes:
            raise ValueError("relations and sizes must be non-empty")
        return self


class GrammarFact(BaseModel):
    """The structured content of one grammar caption."""

    model_config = ConfigDict(frozen=True)

    subject: str
    subject_size: Size
    relation: Relation
    anchor: str
    anchor_size: Size

    @property
    def caption(self) -> str:
        return (
            f"a {self.subject_size} {self.subject} {self.relation} "
            f"a {self.anchor_size} {self.anchor}"
        )


_CAPTION_RE = re.compile(
    r"^a (small|large) (\w+) (left of|right of|above|below) a (small|large) (\w+)$"
)


def parse_caption(caption: str) -> GrammarFact | None:
    """Inverse of GrammarFact.caption; None for text outside the grammar."""
    match = _CAPTION_RE.match(caption.strip().lower())
    if match is None:
        return None
    s_size, subject, relation, a_size, anchor = match.groups()
    return GrammarFact(
        subject=subject,
        subject_size=Size(s_size),
        relation=Relation(relation),
        anchor=anchor,
        anchor_size=Size(a_size),
    )


# ── geometry ─────────────────────────────────────────────────────────


def _extent_cells(size: Size, grid: int) -> int:
    return grid // 4 if size is Size.SMALL else grid // 2


def _start_cell(center2: int, extent: int, grid: int) -> int:
    """Grid cell where a box of *extent* cells centred at center2/2 begins."""
    return max(0, min(grid - extent, (center2 - extent) // 2))


def _place(label: int, size: Size, along2: int, axis: str, grid: int) -> LabeledBox:
    """Box centred at along2/2 on *axis* and mid-canvas on the other axis."""
    extent = _extent_cells(size, grid)
    main = _start_cell(along2, extent, grid)
    cross = _start_cell(grid, extent, grid)
    if axis == "x":
        x, y = main, cross
    else:
        x, y = cross, main
    return LabeledBox(label=label, x=x / grid, y=y / grid, w=extent / grid, h=extent / grid)


def layout_for(fact: GrammarFact, vocab: LabelVocab, grid: int) -> list[LabeledBox]:
    """The unique layout of a grammar fact, in canonical order."""
    near2, far2 = grid // 2, (3 * grid) // 2
    if fact.relation is Relation.LEFT_OF:
        axis, subject2, anchor2 = "x", near2, far2
    elif fact.relation is Relation.RIGHT_OF:
        axis, subject2, anchor2 = "x", far2, near2
    elif fact.relation is Relation.ABOVE:
        axis, subject2, anchor2 = "y", near2, far2
    else:
        axis, subject2, anchor2 = "y", far2, near2
    boxes = [
        _place(vocab.index(fact.subject), fact.subject_size, subject2, axis, grid),
        _place(vocab.index(fact.anchor), fact.anchor_size, anchor2, axis, grid),
    ]
    return canonical_order(boxes)


# ── co-occurrence ring ──────────────────────────────────────────────


def _ring(config: GrammarConfig) -> list[int]:
    order = list(range(config.num_classes))
    random.Random(config.seed).shuffle(order)  # noqa: S311
    return order


def _neighbours(ring: Sequence[int], cls: int) -> tuple[int, int]:
    pos = ring.index(cls)
    return ring[(pos - 1) % len(ring)], ring[(pos + 1) % len(ring)]


def synth_grammar_generate(config: GrammarConfig, n: int) -> tuple[LabelVocab, list[Scene]]:
    """Generate *n* scenes; bit-identical for a fixed config."""
    if n < 1:
        raise ValueError("n must be >= 1")
    vocab = LabelVocab(CLASS_NAMES[: config.num_classes])
    ring = _ring(config)
    rng = random.Random(config.seed + 1)  # noqa: S311

    scenes: list[Scene] = []
    for i in range(n):
        subject = rng.randrange(config.num_classes)
        anchor = rng.choice(_neighbours(ring, subject))
        fact = GrammarFact(
            subject=vocab.names[subject],
            subject_size=rng.choice(config.sizes),
            relation=rng.choice(config.relations),
            anchor=vocab.names[anchor],
            anchor_size=rng.choice(config.sizes),
        )
        scenes.append(
            Scene(
                id=f"synth-{i:05d}",
                caption=fact.caption,
                boxes=tuple(layout_for(fact, vocab, config.grid)),
            )
        )
    return vocab, scenes


def synth_qa_generate(
    config: GrammarConfig, scenes: Sequence[Scene], n: int
) -> list[MCQuestion]:
    """Questions asking which class stands in a relation to an anchor class.

    The gold answer is the scene's subject; distractors are drawn from classes
    that never co-occur with the anchor, so co-occurrence alone decides it.
    """
    if not scenes:
        raise ValueError("scenes must be non-empty")
    names = CLASS_NAMES[: config.num_classes]
    ring = _ring(config)
    rng = random.Random(config.seed + 2)  # noqa: S311

    questions: list[MCQuestion] = []
    for i in range(n):
        scene = scenes[rng.randrange(len(scenes))]
        fact = parse_caption(scene.caption)
        if fact is None:
            raise ValueError(f"scene {scene.id} caption is outside the grammar")
        anchor = names.index(fact.anchor)
        excluded = {anchor, *_neighbours(ring, anchor)}
        pool = [c for c in range(config.num_classes) if c not in excluded]
        distractors = [names[c] for c in rng.sample(pool, config.num_choices - 1)]
        choices = [*distractors, fact.subject]
        rng.shuffle(choices)
        questions.append(
            MCQuestion(
                id=f"synth-qa-{i:05d}",
                stem=f"what is {fact.relation} a {fact.anchor_size} {fact.anchor}?",
                choices=tuple(choices),
                gold=choices.index(fact.subject),
                style=QAStyle.CSQA,
            )
        )
    return questions


def relation_holds(fact: GrammarFact, boxes: Sequence[LabeledBox], vocab: LabelVocab) -> bool:
    """Whether the first subject and anchor boxes sit as the relation word says.

    Centers are compared strictly; y grows downwards. A layout missing either
    object fails.
    """
    subject = next((b for b in boxes if b.label == vocab.index(fact.subject)), None)
    anchor = next((b for b in boxes if b.label == vocab.index(fact.anchor)), None)
    if subject is None or anchor is None:
        return False
    (sx, sy), (ax, ay) = subject.center, anchor.center
    if fact.relation is Relation.LEFT_OF:
        return sx < ax
    if fact.relation is Relation.RIGHT_OF:
        return sx > ax
    if fact.relation is Relation.ABOVE:
        return sy < ay
    return sy > ay
