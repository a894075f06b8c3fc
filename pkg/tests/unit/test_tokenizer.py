"""Tests for the word-level tokenizer."""

from __future__ import annotations

from pathlib import Path

import pytest

from layoutprior.textenc.tokenizer import (
    SPECIAL_TOKENS,
    TokenSequence,
    Tokenizer,
    basic_split,
    build_vocab,
    pad_batch,
)


def test_basic_split_lowercases_and_splits_punctuation() -> None:
    assert basic_split("Hello, World!  a-b") == ["hello", ",", "world", "!", "a", "-", "b"]


def test_build_vocab_orders_by_frequency_then_alphabet() -> None:
    tok = build_vocab(["b a c", "a c", "a"])
    assert tok.tokens == (*SPECIAL_TOKENS, "a", "c", "b")


def test_build_vocab_min_freq_and_max_size() -> None:
    assert "b" not in build_vocab(["a b", "a"], min_freq=2).tokens
    assert len(build_vocab(["a b c d"], max_size=7)) == 7


def test_tokenizer_requires_special_prefix() -> None:
    with pytest.raises(ValueError):
        Tokenizer(["a", *SPECIAL_TOKENS])
    with pytest.raises(ValueError):
        Tokenizer([*SPECIAL_TOKENS, "a", "a"])


class TestTokenize:
    def setup_method(self) -> None:
        self.tok = build_vocab(["a cat on a tree"])

    def test_wraps_in_cls_and_sep(self) -> None:
        seq = self.tok.tokenize("a cat")
        assert self.tok.decode(seq.ids) == ["[CLS]", "a", "cat", "[SEP]"]
        assert seq.segments == (0, 0, 0, 0)
        assert seq.mask == (1, 1, 1, 1)

    def test_unknown_word_maps_to_unk(self) -> None:
        assert self.tok.tokenize("a zebra").ids[2] == self.tok.unk_id

    def test_truncation_keeps_cls_and_sep(self) -> None:
        seq = self.tok.tokenize("a cat on a tree", max_len=4)
        assert self.tok.decode(seq.ids) == ["[CLS]", "a", "cat", "[SEP]"]

    def test_pad_to(self) -> None:
        seq = self.tok.tokenize("cat", pad_to=6)
        assert len(seq) == 6
        assert seq.real_length == 3
        assert seq.ids[3:] == (self.tok.pad_id,) * 3

    def test_empty_text_rejected(self) -> None:
        with pytest.raises(ValueError):
            self.tok.tokenize("   ")

    def test_pair_segments(self) -> None:
        seq = self.tok.tokenize_pair("a cat", "tree")
        assert self.tok.decode(seq.ids) == ["[CLS]", "a", "cat", "[SEP]", "tree", "[SEP]"]
        assert seq.segments == (0, 0, 0, 0, 1, 1)

    def test_pair_truncates_longest_first(self) -> None:
        seq = self.tok.tokenize_pair("a cat on a tree", "a tree", max_len=7)
        assert self.tok.decode(seq.ids) == ["[CLS]", "a", "cat", "[SEP]", "a", "tree", "[SEP]"]


def test_file_round_trip_preserves_digest(tmp_path: Path) -> None:
    tok = build_vocab(["one two three"])
    tok.to_file(tmp_path / "tokens.txt")
    again = Tokenizer.from_file(tmp_path / "tokens.txt")
    assert again.tokens == tok.tokens
    assert again.digest() == tok.digest()


def test_pad_batch() -> None:
    seqs = [TokenSequence((2, 5, 3), (0, 0, 0), (1, 1, 1)), TokenSequence((2, 3), (0, 0), (1, 1))]
    batch = pad_batch(seqs)
    assert batch.ids.tolist() == [[2, 5, 3], [2, 3, 0]]
    assert batch.mask.tolist() == [[True, True, True], [True, True, False]]
    assert len(batch.select(slice(1, 2))) == 1


def test_pad_batch_empty_rejected() -> None:
    with pytest.raises(ValueError):
        pad_batch([])
