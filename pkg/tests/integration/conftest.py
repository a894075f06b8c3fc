"""Shared fixtures for integration tests.

These tests exercise the real pipeline end to end at desk scale:
    grammar corpus → layout training → knowledge features → QA fine-tuning

No mocks on internal components. The trained layout model is built once
per session and shared; tests that mutate a model take a copy.
"""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path

import pytest
import torch

from layoutprior.artifacts.config import RunConfig, load_run_config
from layoutprior.artifacts.metrics_log import InMemoryMetricsLog
from layoutprior.artifacts.models import save_layout_model
from layoutprior.data.synthetic import GrammarConfig, synth_grammar_generate, synth_qa_generate
from layoutprior.data.types import LabelVocab, MCQuestion, Scene
from layoutprior.determinism import seed_everything
from layoutprior.layout.decoder import LayoutGenerator
from layoutprior.layout.training import LayoutTrainResult, train_layout
from layoutprior.textenc.tokenizer import Tokenizer, build_vocab

GRAMMAR_SCENES = 2000
GRAMMAR_QUESTIONS = 500
HELD_OUT = 200


@dataclass(frozen=True)
class GrammarData:
    vocab: LabelVocab
    train: list[Scene]
    held_out: list[Scene]
    qa_train: list[MCQuestion]
    qa_dev: list[MCQuestion]
    tokenizer: Tokenizer


@dataclass(frozen=True)
class TrainedLayout:
    model: LayoutGenerator
    result: LayoutTrainResult
    log: InMemoryMetricsLog
    checkpoint: Path


@pytest.fixture(scope="session", autouse=True)
def _serial_torch() -> Iterator[None]:
    threads = torch.get_num_threads()
    deterministic = torch.are_deterministic_algorithms_enabled()
    yield
    torch.set_num_threads(threads)
    torch.use_deterministic_algorithms(deterministic)


@pytest.fixture(scope="session")
def desk_config() -> RunConfig:
    return load_run_config(profile="desk")


@pytest.fixture(scope="session")
def grammar_data(desk_config: RunConfig) -> GrammarData:
    grammar = desk_config.synth.grammar
    vocab, scenes = synth_grammar_generate(grammar, GRAMMAR_SCENES)
    questions = synth_qa_generate(grammar, scenes, GRAMMAR_QUESTIONS)
    n_dev = round(len(questions) * desk_config.synth.dev_fraction)
    texts = [s.caption for s in scenes] + [t for q in questions for t in (q.stem, *q.choices)]
    return GrammarData(
        vocab=vocab,
        train=scenes[:-HELD_OUT],
        held_out=scenes[-HELD_OUT:],
        qa_train=questions[:-n_dev],
        qa_dev=questions[-n_dev:],
        tokenizer=build_vocab(texts),
    )


@pytest.fixture(scope="session")
def fresh_grammar(desk_config: RunConfig) -> GrammarConfig:
    """Same grammar, different sampling seed: captions the model never trained on."""
    grammar = desk_config.synth.grammar
    return grammar.model_copy(update={"seed": grammar.seed + 100})


def train_grammar_model(
    config: RunConfig, data: GrammarData, *, epochs: int | None = None
) -> tuple[LayoutGenerator, LayoutTrainResult, InMemoryMetricsLog]:
    seed_everything(config.seed, serial=config.serial)
    encoder_cfg = config.encoder.with_vocab(len(data.tokenizer)).model_copy(
        update={"seed": config.seed}
    )
    layout_cfg = config.layout.with_classes(data.vocab.num_classes).model_copy(
        update={"seed": config.seed}
    )
    model = LayoutGenerator(encoder_cfg, layout_cfg)
    update: dict[str, int] = {"seed": config.seed}
    if epochs is not None:
        update["epochs"] = epochs
    log = InMemoryMetricsLog()
    result = train_layout(
        model,
        data.train,
        data.tokenizer,
        config.layout_train.model_copy(update=update),
        val_scenes=data.held_out,
        metrics_log=log,
    )
    return model, result, log


@pytest.fixture(scope="session")
def trained_layout(
    desk_config: RunConfig, grammar_data: GrammarData, tmp_path_factory: pytest.TempPathFactory
) -> TrainedLayout:
    model, result, log = train_grammar_model(desk_config, grammar_data)
    checkpoint = tmp_path_factory.mktemp("layout") / "layout.ckpt"
    save_layout_model(
        checkpoint,
        model,
        tokenizer=grammar_data.tokenizer,
        vocab=grammar_data.vocab,
        seed=desk_config.seed,
        extra={"best_epoch": result.best_epoch},
    )
    return TrainedLayout(model=model, result=result, log=log, checkpoint=checkpoint)
