"""Layout drawings: SVG for figures, a character grid for terminals and tests."""

from __future__ import annotations

import string
from collections.abc import Sequence
from pathlib import Path
from typing import Literal
from xml.sax.saxutils import escape, quoteattr

from layoutprior.data.layouts import canonical_order
from layoutprior.data.types import LabeledBox, LabelVocab
from layoutprior.errors import ArtifactWriteError
from layoutprior.layout.raster import rasterize

__all__ = ["RenderFormat", "glyphs", "text_grid", "svg_document", "render_layout"]

RenderFormat = Literal["svg", "text-grid"]

BLANK = "."
_SPARE_GLYPHS = (
    string.ascii_lowercase + string.ascii_uppercase + string.digits + string.punctuation
)
_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)  # fmt: skip


def glyphs(vocab: LabelVocab) -> dict[int, str]:
    """One distinct character per category, assigned in index order.

    A category takes the first letter of its name not already taken, then the
    first free spare character; ``?`` only once all of those are used.
    """
    taken = {BLANK}
    table: dict[int, str] = {}
    for index, name in enumerate(vocab.names):
        candidates = [c for c in name.lower() if c.isalnum()] + list(_SPARE_GLYPHS)
        glyph = next((c for c in candidates if c not in taken), "?")
        taken.add(glyph)
        table[index] = glyph
    return table


def text_grid(
    boxes: Sequence[LabeledBox], vocab: LabelVocab, width: int = 8, height: int = 8
) -> str:
    """Rows top to bottom; each covered cell shows its category's glyph.

    Coverage is the rasterizer's, and later boxes overwrite earlier ones.
    """
    table = glyphs(vocab)
    grid = [[BLANK] * width for _ in range(height)]
    for box in boxes:
        covered = rasterize([box], vocab.num_classes, width, height)[box.label]
        for i, j in zip(*covered.nonzero(), strict=True):
            grid[int(j)][int(i)] = table[box.label]
    return "".join("".join(row) + "\n" for row in grid)


def svg_document(
    boxes: Sequence[LabeledBox],
    vocab: LabelVocab,
    *,
    size: int = 256,
    title: str | None = None,
) -> str:
    """One outlined, labeled rectangle per box in canonical order."""
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white" stroke="black"/>',
    ]
    if title:
        lines.append(f"<title>{escape(title)}</title>")
    for box in canonical_order(boxes):
        colour = _PALETTE[box.label % len(_PALETTE)]
        x, y, w, h = (v * size for v in box.coords)
        name = vocab.name(box.label)
        lines.append(
            f'<g><rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" '
            f'fill="none" stroke="{colour}" stroke-width="2"/>'
            f'<text x="{x + 3:.2f}" y="{y + 12:.2f}" font-size="11" fill="{colour}" '
            f"data-label={quoteattr(name)}>{escape(name)}</text></g>"
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_layout(
    boxes: Sequence[LabeledBox],
    vocab: LabelVocab,
    path: str | Path,
    fmt: RenderFormat = "svg",
    *,
    grid: int = 8,
    size: int = 256,
    title: str | None = None,
) -> Path:
    if fmt == "svg":
        body = svg_document(boxes, vocab, size=size, title=title)
    elif fmt == "text-grid":
        body = text_grid(boxes, vocab, grid, grid)
    else:
        raise ValueError(f"unknown render format {fmt!r}")
    out = Path(path)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(body, encoding="utf-8")
    except OSError as exc:
        raise ArtifactWriteError(f"cannot write {out}: {exc.strerror}", path=str(out)) from exc
    return out
