"""Shared fixtures: tiny model shapes and a small grammar corpus."""

from __future__ import annotations

from pathlib import Path

import pytest
import torch

from layoutprior.data.synthetic import GrammarConfig, synth_grammar_generate, synth_qa_generate
from layoutprior.data.types import LabelVocab, MCQuestion, Scene
from layoutprior.layout.decoder import LayoutGenerator, LayoutModelConfig
from layoutprior.textenc.encoder import EncoderConfig
from layoutprior.textenc.tokenizer import Tokenizer, build_vocab


@pytest.fixture()
def vocab() -> LabelVocab:
    return LabelVocab(("cat", "dog", "tree"))


@pytest.fixture()
def grammar() -> GrammarConfig:
    return GrammarConfig()


@pytest.fixture()
def grammar_corpus(grammar: GrammarConfig) -> tuple[LabelVocab, list[Scene]]:
    return synth_grammar_generate(grammar, 24)


@pytest.fixture()
def grammar_questions(
    grammar: GrammarConfig, grammar_corpus: tuple[LabelVocab, list[Scene]]
) -> list[MCQuestion]:
    return synth_qa_generate(grammar, grammar_corpus[1], 12)


@pytest.fixture()
def tokenizer(
    grammar_corpus: tuple[LabelVocab, list[Scene]], grammar_questions: list[MCQuestion]
) -> Tokenizer:
    texts = [s.caption for s in grammar_corpus[1]]
    texts += [t for q in grammar_questions for t in (q.stem, *q.choices)]
    texts += ["a cat on a tree", "Q: A:"]
    return build_vocab(texts)


@pytest.fixture()
def encoder_config() -> EncoderConfig:
    return EncoderConfig(hidden=16, layers=1, heads=2, ffn=32, max_len=24, dropout=0.0)


@pytest.fixture()
def layout_config() -> LayoutModelConfig:
    return LayoutModelConfig(
        raster=8,
        state_grid=4,
        state_channels=4,
        label_embedding=4,
        attention_dim=8,
        conv_channels=2,
        head_hidden=8,
    )


@pytest.fixture()
def layout_model(
    grammar_corpus: tuple[LabelVocab, list[Scene]],
    tokenizer: Tokenizer,
    encoder_config: EncoderConfig,
    layout_config: LayoutModelConfig,
) -> LayoutGenerator:
    torch.manual_seed(0)
    vocab, _ = grammar_corpus
    return LayoutGenerator(
        encoder_config.with_vocab(len(tokenizer)), layout_config.with_classes(vocab.num_classes)
    )


@pytest.fixture()
def scene_file(tmp_path: Path) -> Path:
    """Two pixel-coordinate scenes on a 100 x 50 canvas, one with two captions."""
    path = tmp_path / "scenes.jsonl"
    path.write_text(
        '{"id": "s1", "caption": "a cat on a tree", "width": 100, "height": 50, '
        '"objects": [{"label": "cat", "x": 10, "y": 5, "w": 30, "h": 20}, '
        '{"label": "tree", "x": 50, "y": 0, "w": 40, "h": 50}]}\n'
        "\n"
        '{"id": "s2", "captions": ["a dog", "one dog"], "width": 100, "height": 100, '
        '"objects": [{"label": "dog", "x": 0, "y": 0, "w": 50, "h": 50}]}\n',
        encoding="utf-8",
    )
    return path
