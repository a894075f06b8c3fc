"""Run configuration: one JSON document, two named profiles, dotted overrides.

Resolution order: profile defaults, then the config file, then each
``--set a.b=value`` in command-line order. Unknown keys anywhere are errors.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from layoutprior.data.mcqa import WinoGrandeSize, winogrande_train_file
from layoutprior.data.synthetic import GrammarConfig
from layoutprior.data.types import QAStyle
from layoutprior.errors import ConfigError
from layoutprior.layout.decoder import LayoutModelConfig
from layoutprior.layout.mlm_ablation import MLMConfig
from layoutprior.layout.training import LayoutTrainConfig
from layoutprior.reasoning.training import QATrainConfig
from layoutprior.textenc.encoder import EncoderConfig

__all__ = [
    "Profile",
    "DataConfig",
    "SynthConfig",
    "ReasonerConfig",
    "RunConfig",
    "PROFILES",
    "profile_defaults",
    "apply_override",
    "load_run_config",
]

Profile = Literal["desk", "paper"]


class DataConfig(BaseModel):
    """Corpus locations, relative to LAYOUTPRIOR_DATA_ROOT unless absolute."""

    model_config = ConfigDict(extra="forbid")

    scenes: str = "synth/scenes.jsonl"
    labels: str | None = "synth/labels.txt"
    tokens: str = "synth/tokens.txt"
    captions_for_mlm: str | None = None
    qa_train: str = "synth/qa_train.jsonl"
    qa_dev: str = "synth/qa_dev.jsonl"
    qa_style: QAStyle = QAStyle.CSQA
    winogrande_size: WinoGrandeSize | None = None
    min_area_frac: float = Field(default=0.02, ge=0, lt=1)
    max_objects: int = Field(default=20, ge=1)
    min_freq: int = Field(default=1, ge=1)
    max_vocab: int | None = None

    @model_validator(mode="after")
    def _size_needs_winogrande(self) -> DataConfig:
        if self.winogrande_size is not None and self.qa_style is not QAStyle.WINOGRANDE:
            raise ValueError("winogrande_size needs qa_style winogrande")
        return self

    def qa_train_file(self) -> str:
        """The QA training file; a WinoGrande size picks train_<size>.jsonl beside qa_train."""
        if self.winogrande_size is None:
            return self.qa_train
        return str(winogrande_train_file(Path(self.qa_train).parent, self.winogrande_size))


class SynthConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    grammar: GrammarConfig = GrammarConfig()
    scenes: int = Field(default=2000, ge=1)
    questions: int = Field(default=500, ge=1)
    dev_fraction: float = Field(default=0.2, gt=0, lt=1)


class ReasonerConfig(BaseModel):
    """The downstream LM and the restart/grid settings around fine-tuning."""

    model_config = ConfigDict(extra="forbid")

    lm: EncoderConfig = EncoderConfig()
    restarts: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    grid_lr: list[float] = Field(default_factory=lambda: [1e-5, 2e-5])
    grid_epochs: list[int] = Field(default_factory=lambda: [3, 5, 8])
    grid_batch: list[int] = Field(default_factory=lambda: [8, 16, 32])


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    profile: Profile = "desk"
    seed: int = 0
    serial: bool = True
    max_steps: int = Field(default=20, ge=1)
    data: DataConfig = DataConfig()
    synth: SynthConfig = SynthConfig()
    encoder: EncoderConfig = EncoderConfig()
    layout: LayoutModelConfig = LayoutModelConfig()
    layout_train: LayoutTrainConfig = LayoutTrainConfig()
    mlm: MLMConfig = MLMConfig()
    reasoner: ReasonerConfig = ReasonerConfig()
    qa_train: QATrainConfig = QATrainConfig()


_DESK: dict[str, Any] = {
    "profile": "desk",
    "encoder": {"hidden": 64, "layers": 2, "heads": 4, "ffn": 128, "max_len": 32},
    "layout": {
        "raster": 32,
        "state_grid": 8,
        "state_channels": 32,
        "label_embedding": 16,
        "attention_dim": 64,
        "conv_channels": 8,
        "head_hidden": 64,
    },
    "layout_train": {"lr": 1e-3, "batch_size": 32, "epochs": 20, "max_len": 32},
    "mlm": {"lr": 1e-3, "batch_size": 32, "epochs": 3, "max_len": 32},
    "reasoner": {
        "lm": {"hidden": 64, "layers": 2, "heads": 4, "ffn": 128, "max_len": 32},
        "restarts": [0, 1, 2, 3, 4],
    },
    "qa_train": {"lr": 5e-4, "batch_size": 16, "epochs": 10, "warmup": 0.1, "max_len": 32},
}

# BERT-base shapes and the published fine-tuning recipe
_BERT_BASE = {"hidden": 768, "layers": 12, "heads": 12, "ffn": 3072, "max_len": 128}
_PAPER: dict[str, Any] = {
    "profile": "paper",
    "data": {
        "scenes": "coco/scenes_train.jsonl",
        "labels": "coco/labels.txt",
        "tokens": "coco/tokens.txt",
        "captions_for_mlm": "coco/scenes_train.jsonl",
        "qa_train": "csqa/train_rand_split.jsonl",
        "qa_dev": "csqa/dev_rand_split.jsonl",
    },
    "encoder": _BERT_BASE,
    "layout": {"raster": 64, "state_grid": 16, "state_channels": 64, "label_embedding": 32},
    "layout_train": {
        "lr": 5e-5,
        "batch_size": 32,
        "epochs": 15,
        "step_size": 3,
        "gamma": 0.8,
        "max_len": 128,
    },
    "mlm": {"lr": 5e-5, "batch_size": 32, "epochs": 3, "max_len": 128},
    "reasoner": {"lm": _BERT_BASE},
    "qa_train": {"lr": 2e-5, "batch_size": 16, "epochs": 5, "warmup": 0.1, "max_len": 128},
}

PROFILES: dict[str, dict[str, Any]] = {"desk": _DESK, "paper": _PAPER}


def profile_defaults(profile: str) -> dict[str, Any]:
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; expected one of {sorted(PROFILES)}")
    return json.loads(json.dumps(PROFILES[profile]))  # type: ignore[no-any-return]


def _merge(base: dict[str, Any], update: dict[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_override(doc: dict[str, Any], assignment: str) -> dict[str, Any]:
    """Apply one ``a.b.c=value`` assignment; the value is JSON when it parses."""
    path, sep, raw = assignment.partition("=")
    keys = path.strip().split(".")
    if not sep or not all(keys):
        raise ConfigError(f"bad override {assignment!r}; expected dotted.key=value")
    nested: dict[str, Any] = {}
    cursor = nested
    for key in keys[:-1]:
        cursor = cursor.setdefault(key, {})
    cursor[keys[-1]] = _parse_value(raw.strip())
    return _merge(doc, nested)


def load_run_config(
    path: str | Path | None = None,
    *,
    profile: str | None = None,
    overrides: Sequence[str] = (),
    seed: int | None = None,
) -> RunConfig:
    """Profile, then file, then overrides; validated in one go."""
    file_doc: dict[str, Any] = {}
    if path is not None:
        try:
            file_doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}", path=str(path)) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})", path=str(path)) from exc
        if not isinstance(file_doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object", path=str(path))
    chosen = profile or str(file_doc.get("profile", "desk"))
    doc = _merge(profile_defaults(chosen), file_doc)
    doc["profile"] = chosen
    for assignment in overrides:
        doc = apply_override(doc, assignment)
    if seed is not None:
        doc["seed"] = seed
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"invalid run config: {problems}") from exc
