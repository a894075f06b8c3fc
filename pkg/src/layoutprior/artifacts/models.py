"""Saving and restoring the three model kinds through the checkpoint archive.

- ``layout``: the full layout generator (text encoder under ``text_encoder.``)
- ``encoder``: a bare text encoder, e.g. the caption-MLM ablation
- ``reasoner``: the fine-tuned LM plus scoring head
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

import torch
from pydantic import ValidationError

from layoutprior.artifacts.checkpoint import (
    Checkpoint,
    CheckpointManifest,
    load_checkpoint,
    save_checkpoint,
)
from layoutprior.data.types import LabelVocab
from layoutprior.errors import CheckpointError, VocabMismatchError
from layoutprior.layout.decoder import LayoutGenerator, LayoutModelConfig
from layoutprior.reasoning.features import check_encoder_config
from layoutprior.reasoning.head import MultipleChoiceReasoner
from layoutprior.reasoning.training import QATrainConfig
from layoutprior.textenc.encoder import EncoderConfig, TextEncoder
from layoutprior.textenc.tokenizer import Tokenizer

__all__ = [
    "LoadedLayoutModel",
    "LoadedEncoder",
    "LoadedReasoner",
    "save_layout_model",
    "load_layout_model",
    "save_encoder",
    "load_encoder",
    "warm_start_encoder",
    "save_reasoner",
    "load_reasoner",
]


@dataclass(frozen=True)
class LoadedLayoutModel:
    model: LayoutGenerator
    tokenizer: Tokenizer
    vocab: LabelVocab
    manifest: CheckpointManifest


@dataclass(frozen=True)
class LoadedEncoder:
    encoder: TextEncoder
    tokenizer: Tokenizer
    manifest: CheckpointManifest


@dataclass(frozen=True)
class LoadedReasoner:
    model: MultipleChoiceReasoner
    tokenizer: Tokenizer
    manifest: CheckpointManifest

    @property
    def variant(self) -> str:
        return str(self.manifest.config.get("variant", "none"))

    @property
    def knowledge_digest(self) -> str | None:
        value = self.manifest.config.get("knowledge_digest")
        return str(value) if value is not None else None

    @property
    def qa_train(self) -> QATrainConfig | None:
        """The fine-tuning config the weights were trained with, when recorded."""
        raw = self.manifest.config.get("qa_train")
        if raw is None:
            return None
        try:
            return QATrainConfig.model_validate(raw)
        except ValidationError as exc:
            raise CheckpointError(f"invalid qa_train config in checkpoint: {exc}") from exc


def _match_dtype(module: torch.nn.Module, state: dict[str, torch.Tensor]) -> None:
    if any(t.dtype == torch.float64 for t in state.values()):
        module.double()


def _restore(module: torch.nn.Module, state: dict[str, torch.Tensor], source: Path) -> None:
    _match_dtype(module, state)
    expected = module.state_dict()
    missing = [k for k in expected if k not in state]
    if missing:
        raise CheckpointError(f"{source}: missing array {missing[0]!r}", array=missing[0])
    for name, tensor in expected.items():
        if tuple(state[name].shape) != tuple(tensor.shape):
            raise CheckpointError(
                f"{source}: array {name!r} has shape {tuple(state[name].shape)}, "
                f"model expects {tuple(tensor.shape)}",
                array=name,
            )
    module.load_state_dict({k: state[k] for k in expected})


def _tokenizer(checkpoint: Checkpoint, source: Path) -> Tokenizer:
    if not checkpoint.manifest.tokens:
        raise CheckpointError(f"{source}: checkpoint carries no tokenizer vocabulary")
    return Tokenizer(checkpoint.manifest.tokens)


# ── layout ───────────────────────────────────────────────────────


def save_layout_model(
    path: str | Path,
    model: LayoutGenerator,
    *,
    tokenizer: Tokenizer,
    vocab: LabelVocab,
    seed: int,
    extra: dict[str, Any] | None = None,
) -> CheckpointManifest:
    config = {
        "encoder": model.text_encoder.config.model_dump(),
        "layout": model.config.model_dump(),
        **(extra or {}),
    }
    return save_checkpoint(
        path,
        model.state_dict(),
        kind="layout",
        config=config,
        seed=seed,
        vocab_hash=vocab.digest(),
        tokenizer_hash=tokenizer.digest(),
        labels=list(vocab.names),
        tokens=list(tokenizer.tokens),
    )


def load_layout_model(path: str | Path, *, vocab: LabelVocab | None = None) -> LoadedLayoutModel:
    """Rebuild the generator; *vocab*, when given, must be the one it was trained on."""
    src = Path(path)
    ckpt = load_checkpoint(src, kind="layout")
    manifest = ckpt.manifest
    saved_vocab = LabelVocab(tuple(manifest.labels))
    if vocab is not None and vocab.digest() != manifest.vocab_hash:
        raise VocabMismatchError(
            f"{src}: label vocab differs from the checkpoint's "
            f"({vocab.num_classes} vs {saved_vocab.num_classes} classes)",
            expected=manifest.vocab_hash,
            found=vocab.digest(),
        )
    encoder_config = EncoderConfig.model_validate(manifest.config["encoder"])
    layout_config = LayoutModelConfig.model_validate(manifest.config["layout"])
    model = LayoutGenerator(encoder_config, layout_config)
    _restore(model, ckpt.state, src)
    model.eval()
    return LoadedLayoutModel(model, _tokenizer(ckpt, src), saved_vocab, manifest)


# ── encoder ──────────────────────────────────────────────────────


def save_encoder(
    path: str | Path,
    encoder: TextEncoder,
    *,
    tokenizer: Tokenizer,
    seed: int,
    source: str,
) -> CheckpointManifest:
    return save_checkpoint(
        path,
        encoder.state_dict(),
        kind="encoder",
        config={"encoder": encoder.config.model_dump(), "source": source},
        seed=seed,
        tokenizer_hash=tokenizer.digest(),
        tokens=list(tokenizer.tokens),
    )


def load_encoder(path: str | Path) -> LoadedEncoder:
    """A text encoder from an ``encoder`` checkpoint or the encoder part of a ``layout`` one."""
    src = Path(path)
    ckpt = load_checkpoint(src)
    if ckpt.manifest.kind == "layout":
        state = ckpt.subset("text_encoder")
    elif ckpt.manifest.kind == "encoder":
        state = ckpt.state
    else:
        raise CheckpointError(f"{src}: a {ckpt.manifest.kind} checkpoint holds no text encoder")
    config = EncoderConfig.model_validate(ckpt.manifest.config["encoder"])
    encoder = TextEncoder(config)
    _restore(encoder, state, src)
    encoder.eval()
    return LoadedEncoder(encoder, _tokenizer(ckpt, src), ckpt.manifest)


def warm_start_encoder(
    model: LayoutGenerator, path: str | Path, *, tokenizer: Tokenizer
) -> CheckpointManifest:
    """Copy external text-encoder weights into *model* before layout training.

    The source must share the architecture (seed aside) and the word vocabulary.
    """
    src = Path(path)
    loaded = load_encoder(src)
    check_encoder_config(loaded.encoder.config, model.text_encoder.config, source=str(src))
    if loaded.tokenizer.digest() != tokenizer.digest():
        raise VocabMismatchError(
            f"{src}: word vocabulary differs from the run's "
            f"({len(loaded.tokenizer)} vs {len(tokenizer)} tokens)",
            expected=tokenizer.digest(),
            found=loaded.tokenizer.digest(),
        )
    _restore(model.text_encoder, loaded.encoder.state_dict(), src)
    return loaded.manifest


# ── reasoner ─────────────────────────────────────────────────────


def save_reasoner(
    path: str | Path,
    model: MultipleChoiceReasoner,
    *,
    tokenizer: Tokenizer,
    seed: int,
    variant: str,
    knowledge_digest: str | None,
    extra: dict[str, Any] | None = None,
) -> CheckpointManifest:
    config = {
        "lm": model.lm.config.model_dump(),
        "knowledge_dim": model.head.knowledge_dim,
        "variant": variant,
        "knowledge_digest": knowledge_digest,
        **(extra or {}),
    }
    return save_checkpoint(
        path,
        model.state_dict(),
        kind="reasoner",
        config=config,
        seed=seed,
        tokenizer_hash=tokenizer.digest(),
        tokens=list(tokenizer.tokens),
    )


def load_reasoner(path: str | Path) -> LoadedReasoner:
    src = Path(path)
    ckpt = load_checkpoint(src, kind="reasoner")
    config = ckpt.manifest.config
    lm_config = EncoderConfig.model_validate(config["lm"])
    knowledge_dim = config.get("knowledge_dim")
    dim = int(knowledge_dim) if knowledge_dim is not None else None
    model = MultipleChoiceReasoner(lm_config, dim, seed=ckpt.manifest.seed)
    _restore(model, ckpt.state, src)
    model.eval()
    return LoadedReasoner(model, _tokenizer(ckpt, src), ckpt.manifest)
