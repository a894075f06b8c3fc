"""Tests for the masked-language-model objective."""

from __future__ import annotations

import math

import pytest
import torch

from layoutprior.layout.gradcheck import max_relative_error
from layoutprior.textenc.encoder import EncoderConfig, TextEncoder
from layoutprior.textenc.mlm import (
    IGNORE_INDEX,
    MaskedLMHead,
    mask_tokens,
    masked_count,
    mlm_loss,
    mlm_step,
)
from layoutprior.textenc.tokenizer import TokenBatch, Tokenizer, build_vocab, pad_batch


@pytest.mark.parametrize(("n", "expected"), [(20, 3), (7, 2), (1, 1), (100, 15)])
def test_masked_count_is_ceiling(n: int, expected: int) -> None:
    assert masked_count(n, 0.15) == expected


class TestMaskTokens:
    def setup_method(self) -> None:
        self.tok = build_vocab(["a small cat left of a large dog"])
        self.batch = pad_batch(
            [
                self.tok.tokenize("a small cat left of a large dog"),
                self.tok.tokenize("a cat", pad_to=10),
            ]
        )

    def _mask(self, rate: float = 0.15, seed: int = 0) -> tuple[TokenBatch, torch.Tensor]:
        return mask_tokens(
            self.batch,
            rate,
            mask_id=self.tok.mask_id,
            special_ids=self.tok.special_ids,
            generator=torch.Generator().manual_seed(seed),
        )

    def test_counts_per_row(self) -> None:
        masked, labels = self._mask(0.15)
        assert (labels[0] != IGNORE_INDEX).sum() == 2
        assert (labels[1] != IGNORE_INDEX).sum() == 1
        assert ((masked.ids == self.tok.mask_id) == (labels != IGNORE_INDEX)).all()

    def test_never_masks_special_or_padding(self) -> None:
        _, labels = self._mask(0.9)
        hit = labels != IGNORE_INDEX
        special = torch.isin(self.batch.ids, torch.tensor(sorted(self.tok.special_ids)))
        assert not (hit & special).any()
        assert not (hit & ~self.batch.mask).any()

    def test_labels_hold_original_ids(self) -> None:
        _, labels = self._mask(0.5)
        hit = labels != IGNORE_INDEX
        assert torch.equal(labels[hit], self.batch.ids[hit])

    def test_seeded(self) -> None:
        assert torch.equal(self._mask(seed=3)[1], self._mask(seed=3)[1])

    @pytest.mark.parametrize("rate", [0.0, 1.0])
    def test_rate_bounds(self, rate: float) -> None:
        with pytest.raises(ValueError):
            self._mask(rate)

    def test_row_without_maskable_position(self) -> None:
        only_special = TokenBatch(
            ids=torch.tensor([[self.tok.cls_id, self.tok.sep_id]]),
            segments=torch.zeros(1, 2, dtype=torch.long),
            mask=torch.ones(1, 2, dtype=torch.bool),
        )
        with pytest.raises(ValueError, match="maskable"):
            mask_tokens(
                only_special,
                0.15,
                mask_id=self.tok.mask_id,
                special_ids=self.tok.special_ids,
                generator=torch.Generator().manual_seed(0),
            )


def test_mlm_loss_ignores_unmasked_positions() -> None:
    logits = torch.zeros(1, 3, 4)
    logits[0, 1, 2] = 100.0
    labels = torch.tensor([[IGNORE_INDEX, 2, IGNORE_INDEX]])
    assert float(mlm_loss(logits, labels)) == pytest.approx(0.0, abs=1e-6)


def test_mlm_step_backpropagates(tokenizer: Tokenizer, encoder_config: EncoderConfig) -> None:
    encoder = TextEncoder(encoder_config.with_vocab(len(tokenizer)))
    head = MaskedLMHead(encoder_config.hidden, len(tokenizer))
    batch = pad_batch([tokenizer.tokenize("a small cat left of a large dog")])
    loss = mlm_step(
        encoder,
        head,
        batch,
        0.15,
        mask_id=tokenizer.mask_id,
        special_ids=tokenizer.special_ids,
        generator=torch.Generator().manual_seed(0),
    )
    assert loss.ndim == 0
    assert torch.isfinite(loss)
    loss.backward()
    assert encoder.token_embedding.weight.grad is not None


class TestMLMStep:
    @pytest.fixture(autouse=True)
    def _setup(self, tokenizer: Tokenizer, encoder_config: EncoderConfig) -> None:
        self.tok = tokenizer
        config = encoder_config.model_copy(update={"layers": 2}).with_vocab(len(tokenizer))
        self.encoder = TextEncoder(config).double().eval()
        self.head = MaskedLMHead(config.hidden, len(tokenizer)).double().eval()
        self.batch = pad_batch(
            [
                tokenizer.tokenize("a small cat left of a large dog"),
                tokenizer.tokenize("a cat on a tree"),
            ]
        )

    def _loss(self) -> torch.Tensor:
        return mlm_step(
            self.encoder,
            self.head,
            self.batch,
            0.3,
            mask_id=self.tok.mask_id,
            special_ids=self.tok.special_ids,
            generator=torch.Generator().manual_seed(0),
        )

    def test_uniform_scores_give_log_vocab(self) -> None:
        with torch.no_grad():
            self.head.decoder.weight.zero_()
            self.head.decoder.bias.zero_()
        assert float(self._loss()) == pytest.approx(math.log(len(self.tok)), abs=1e-6)

    def test_gradients_agree(self) -> None:
        params = list(self.encoder.named_parameters()) + [
            (f"head.{name}", p) for name, p in self.head.named_parameters()
        ]
        report = max_relative_error(self._loss, params, samples=150)
        assert report.checked == 150
        assert report.max_rel_error < 1e-3

    def test_pooled_gradients_agree(self) -> None:
        def pooled_sum() -> torch.Tensor:
            return self.encoder.encode(self.batch)[1].sum()

        report = max_relative_error(pooled_sum, list(self.encoder.named_parameters()), samples=100)
        assert report.max_rel_error < 1e-3
