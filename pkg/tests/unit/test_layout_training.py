"""Tests for teacher-forced layout training and the caption-MLM encoder."""

from __future__ import annotations

import pytest
import torch

from layoutprior.artifacts.metrics_log import InMemoryMetricsLog
from layoutprior.data.types import LabelVocab, Scene
from layoutprior.errors import TrainingDivergedError
from layoutprior.layout.decoder import LayoutGenerator
from layoutprior.layout.mlm_ablation import MLMConfig, train_mlm_ablation
from layoutprior.layout.training import (
    LayoutTrainConfig,
    eval_layout,
    make_optimizer,
    train_layout,
)
from layoutprior.textenc.encoder import EncoderConfig
from layoutprior.textenc.tokenizer import Tokenizer

CONFIG = LayoutTrainConfig(lr=1e-3, batch_size=8, epochs=2, max_len=24, val_fraction=0.25)


class TestTrainLayout:
    @pytest.fixture(autouse=True)
    def _setup(
        self,
        layout_model: LayoutGenerator,
        tokenizer: Tokenizer,
        grammar_corpus: tuple[LabelVocab, list[Scene]],
    ) -> None:
        self.model = layout_model
        self.tok = tokenizer
        self.scenes = grammar_corpus[1]

    def test_history_and_metrics_log(self) -> None:
        log = InMemoryMetricsLog()
        result = train_layout(self.model, self.scenes, self.tok, CONFIG, metrics_log=log)
        assert [(r["epoch"], r["split"]) for r in result.history] == [
            (1, "train"),
            (1, "val"),
            (2, "train"),
            (2, "val"),
        ]
        assert log.records() == result.history
        assert result.best_epoch in (1, 2)
        for record in result.history:
            assert 0.0 <= float(record["label_accuracy"]) <= 1.0

    def test_model_ends_on_best_state(self) -> None:
        result = train_layout(self.model, self.scenes, self.tok, CONFIG)
        for name, value in self.model.state_dict().items():
            assert torch.equal(value, result.best_state[name])

    def test_runs_are_reproducible(
        self, tokenizer: Tokenizer, encoder_config: EncoderConfig
    ) -> None:
        first = train_layout(self.model, self.scenes, self.tok, CONFIG).history
        fresh = LayoutGenerator(
            encoder_config.with_vocab(len(tokenizer)), self.model.config
        )
        assert train_layout(fresh, self.scenes, self.tok, CONFIG).history == first

    def test_explicit_validation_set(self) -> None:
        result = train_layout(
            self.model,
            self.scenes[:16],
            self.tok,
            CONFIG.model_copy(update={"epochs": 1}),
            val_scenes=self.scenes[16:],
        )
        assert [r["split"] for r in result.history] == ["train", "val"]

    def test_non_finite_loss_raises(self) -> None:
        with torch.no_grad():
            self.model.label_mlp[2].bias.fill_(float("nan"))
        with pytest.raises(TrainingDivergedError) as info:
            train_layout(self.model, self.scenes, self.tok, CONFIG)
        assert info.value.details["epoch"] == 1

    def test_empty_dataset(self) -> None:
        with pytest.raises(ValueError):
            train_layout(self.model, [], self.tok, CONFIG)

    def test_eval_counts_end_steps(self) -> None:
        metrics = eval_layout(self.model, self.scenes, self.tok, batch_size=8, max_len=24)
        n_boxes = sum(len(s.boxes) for s in self.scenes)
        assert metrics.steps == n_boxes + len(self.scenes)
        assert metrics.boxes == n_boxes


def test_make_optimizer_kinds(layout_model: LayoutGenerator) -> None:
    params = list(layout_model.parameters())
    assert isinstance(make_optimizer(params, CONFIG), torch.optim.Adam)
    adamw = CONFIG.model_copy(update={"optimizer": "adamw", "weight_decay": 0.01})
    assert isinstance(make_optimizer(params, adamw), torch.optim.AdamW)


def test_caption_mlm_encoder(
    grammar_corpus: tuple[LabelVocab, list[Scene]],
    tokenizer: Tokenizer,
    encoder_config: EncoderConfig,
) -> None:
    captions = [s.caption for s in grammar_corpus[1]]
    log = InMemoryMetricsLog()
    config = MLMConfig(lr=1e-3, batch_size=8, epochs=2, max_len=24)
    result = train_mlm_ablation(captions, tokenizer, encoder_config, config, metrics_log=log)
    assert result.encoder.config.vocab_size == len(tokenizer)
    assert not result.encoder.training
    assert [r["epoch"] for r in log.records("train")] == [1, 2]
    assert result.initial_loss > 0


def test_caption_mlm_needs_captions(tokenizer: Tokenizer, encoder_config: EncoderConfig) -> None:
    with pytest.raises(ValueError):
        train_mlm_ablation([], tokenizer, encoder_config, MLMConfig())
