"""Deterministic word-level tokenizer with BERT-style special tokens."""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import torch

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

__all__ = [
    "PAD",
    "UNK",
    "CLS",
    "SEP",
    "MASK",
    "SPECIAL_TOKENS",
    "TokenSequence",
    "TokenBatch",
    "Tokenizer",
    "basic_split",
    "build_vocab",
    "pad_batch",
]

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIAL_TOKENS: tuple[str, ...] = (PAD, UNK, CLS, SEP, MASK)

_WORD_RE = re.compile(r"\w+|[^\w\s]")


def basic_split(text: str) -> list[str]:
    """Lowercase, split on whitespace, and split punctuation into its own tokens."""
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class TokenSequence:
    """ids start with CLS; mask is 1 on real positions and 0 on padding."""

    ids: tuple[int, ...]
    segments: tuple[int, ...]
    mask: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def real_length(self) -> int:
        return sum(self.mask)


@dataclass(frozen=True)
class TokenBatch:
    """Padded batch tensors, shape (B, L)."""

    ids: torch.Tensor
    segments: torch.Tensor
    mask: torch.Tensor

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    def select(self, index: torch.Tensor | slice) -> TokenBatch:
        return TokenBatch(self.ids[index], self.segments[index], self.mask[index])


class Tokenizer:
    """Maps text to TokenSequence through a fixed vocabulary."""

    def __init__(self, tokens: Sequence[str]) -> None:
        if tuple(tokens[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError(f"vocab must start with {SPECIAL_TOKENS}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocab tokens must be unique")
        self.tokens = tuple(tokens)
        self._index = {tok: i for i, tok in enumerate(self.tokens)}
        self.pad_id = self._index[PAD]
        self.unk_id = self._index[UNK]
        self.cls_id = self._index[CLS]
        self.sep_id = self._index[SEP]
        self.mask_id = self._index[MASK]

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def special_ids(self) -> frozenset[int]:
        return frozenset(self._index[t] for t in SPECIAL_TOKENS)

    def word_ids(self, text: str) -> list[int]:
        return [self._index.get(w, self.unk_id) for w in basic_split(text)]

    def tokenize(
        self, text: str, max_len: int = 128, *, pad_to: int | None = None
    ) -> TokenSequence:
        """[CLS] words [SEP], truncated to max_len without dropping CLS or SEP."""
        if not text.strip():
            raise ValueError("cannot tokenize empty text")
        if max_len < 3:
            raise ValueError("max_len must leave room for [CLS] and [SEP]")
        words = self.word_ids(text)[: max_len - 2]
        ids = [self.cls_id, *words, self.sep_id]
        return self._finish(ids, [0] * len(ids), pad_to)

    def tokenize_pair(
        self, first: str, second: str, max_len: int = 128, *, pad_to: int | None = None
    ) -> TokenSequence:
        """[CLS] first [SEP] second [SEP] with segment ids 0/1, longest-first truncation."""
        if not first.strip() or not second.strip():
            raise ValueError("cannot tokenize empty text")
        if max_len < 5:
            raise ValueError("max_len must leave room for [CLS] and two [SEP]")
        a, b = self.word_ids(first), self.word_ids(second)
        budget = max_len - 3
        while len(a) + len(b) > budget:
            if len(a) >= len(b):
                a.pop()
            else:
                b.pop()
        ids = [self.cls_id, *a, self.sep_id, *b, self.sep_id]
        segments = [0] * (len(a) + 2) + [1] * (len(b) + 1)
        return self._finish(ids, segments, pad_to)

    def _finish(self, ids: list[int], segments: list[int], pad_to: int | None) -> TokenSequence:
        mask = [1] * len(ids)
        if pad_to is not None and pad_to > len(ids):
            extra = pad_to - len(ids)
            ids = ids + [self.pad_id] * extra
            segments = segments + [0] * extra
            mask = mask + [0] * extra
        return TokenSequence(tuple(ids), tuple(segments), tuple(mask))

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()

    @classmethod
    def from_file(cls, path: str | Path) -> Tokenizer:
        """One token per line; the first lines are the special tokens."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls([line for line in lines if line])

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text("".join(f"{t}\n" for t in self.tokens), encoding="utf-8")


def build_vocab(
    texts: Iterable[str], *, min_freq: int = 1, max_size: int | None = None
) -> Tokenizer:
    """Vocabulary ordered by descending frequency, ties broken alphabetically."""
    counts: Counter[str] = Counter()
    for text in texts:
        counts.update(basic_split(text))
    words = sorted(
        (w for w, c in counts.items() if c >= min_freq and w not in SPECIAL_TOKENS),
        key=lambda w: (-counts[w], w),
    )
    if max_size is not None:
        words = words[: max(max_size - len(SPECIAL_TOKENS), 0)]
    return Tokenizer([*SPECIAL_TOKENS, *words])


def pad_batch(sequences: Sequence[TokenSequence], pad_id: int = 0) -> TokenBatch:
    """Right-pad sequences to the longest one in the batch."""
    if not sequences:
        raise ValueError("cannot pad an empty batch")
    width = max(len(s) for s in sequences)
    ids = torch.full((len(sequences), width), pad_id, dtype=torch.long)
    segments = torch.zeros((len(sequences), width), dtype=torch.long)
    mask = torch.zeros((len(sequences), width), dtype=torch.bool)
    for row, seq in enumerate(sequences):
        n = len(seq)
        ids[row, :n] = torch.tensor(seq.ids, dtype=torch.long)
        segments[row, :n] = torch.tensor(seq.segments, dtype=torch.long)
        mask[row, :n] = torch.tensor(seq.mask, dtype=torch.bool)
    return TokenBatch(ids=ids, segments=segments, mask=mask)
