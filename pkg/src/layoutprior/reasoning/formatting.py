"""Question/choice pairs as two-segment encoder inputs."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

from layoutprior.data.types import MCQuestion, QAStyle
from layoutprior.textenc.tokenizer import TokenBatch, Tokenizer, pad_batch

__all__ = ["PairText", "format_pair", "default_prefix", "encode_questions", "uniform_arity"]


@dataclass(frozen=True)
class PairText:
    """Segment A and segment B; the tokenizer adds [CLS] and both [SEP]s."""

    first: str
    second: str

    def __str__(self) -> str:
        return f"{self.first} [SEP] {self.second}"


def default_prefix(style: QAStyle) -> bool:
    """Q:/A: prefixes are on for CommonsenseQA-style runs only."""
    return style is QAStyle.CSQA


def format_pair(q: MCQuestion, j: int, *, prefix: bool | None = None) -> PairText:
    if not 0 <= j < q.num_choices:
        raise ValueError(f"question {q.id}: choice {j} out of range")
    choice = q.choices[j]
    if q.style is QAStyle.CSQA:
        use_prefix = default_prefix(q.style) if prefix is None else prefix
        if use_prefix:
            return PairText(f"Q: {q.stem}", f"A: {choice}")
        return PairText(q.stem, choice)

    if "_" not in q.stem:
        raise ValueError(f"question {q.id}: winogrande stem has no '_' blank")
    head, _, tail = q.stem.partition("_")
    head = head.strip()
    second = f"{choice}{tail}".strip()
    if not head:
        # blank opens the sentence: the option itself is the first segment
        return PairText(choice, tail.strip() or choice)
    return PairText(head, second)


def uniform_arity(questions: Sequence[MCQuestion]) -> int:
    """The shared number of choices; mixed arities are rejected."""
    if not questions:
        raise ValueError("no questions")
    arities = {q.num_choices for q in questions}
    if len(arities) != 1:
        raise ValueError(f"questions mix choice counts {sorted(arities)}")
    return arities.pop()


def encode_questions(
    questions: Sequence[MCQuestion],
    tokenizer: Tokenizer,
    *,
    max_len: int = 128,
    prefix: bool | None = None,
) -> TokenBatch:
    """Every (question, choice) pair, question-major: row i * n + j."""
    uniform_arity(questions)
    seqs = [
        tokenizer.tokenize_pair(pair.first, pair.second, max_len)
        for q in questions
        for pair in (format_pair(q, j, prefix=prefix) for j in range(q.num_choices))
    ]
    return pad_batch(seqs, tokenizer.pad_id)
