"""Checkpoint archive: ``manifest.json`` plus one raw little-endian blob per array.

Entries are stored uncompressed with a fixed timestamp, manifest first and
arrays in manifest order, so loading and re-saving reproduces the file
byte for byte.
"""

from __future__ import annotations

import zipfile
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from layoutprior.artifacts.canonical import canonical_bytes
from layoutprior.artifacts.digest import state_digest, tensor_bytes
from layoutprior.errors import CheckpointError
from layoutprior.logging import get_logger

__all__ = [
    "FORMAT_VERSION",
    "CheckpointKind",
    "ArraySpec",
    "CheckpointManifest",
    "Checkpoint",
    "save_checkpoint",
    "write_checkpoint",
    "load_checkpoint",
]

logger = get_logger()

FORMAT_VERSION = 1
_FIXED_DATE = (1980, 1, 1, 0, 0, 0)
_DTYPES: dict[str, torch.dtype] = {
    "float32": torch.float32,
    "float64": torch.float64,
    "int64": torch.int64,
}
_DTYPE_NAMES = {v: k for k, v in _DTYPES.items()}

CheckpointKind = Literal["layout", "encoder", "reasoner"]


class ArraySpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field(min_length=1)
    shape: list[int]
    dtype: Literal["float32", "float64", "int64"]

    @property
    def numel(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def nbytes(self) -> int:
        return self.numel * torch.tensor([], dtype=_DTYPES[self.dtype]).element_size()


class CheckpointManifest(BaseModel):
    """What the archive holds and what produced it."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    format_version: int
    kind: CheckpointKind
    config: dict[str, Any]
    seed: int
    vocab_hash: str = ""
    tokenizer_hash: str = ""
    labels: list[str] = Field(default_factory=list)
    tokens: list[str] = Field(default_factory=list)
    digest: str
    arrays: list[ArraySpec]


@dataclass(frozen=True)
class Checkpoint:
    manifest: CheckpointManifest
    state: dict[str, torch.Tensor]

    def subset(self, prefix: str) -> dict[str, torch.Tensor]:
        """Arrays under ``prefix.`` with the prefix stripped."""
        head = prefix + "."
        return {k[len(head) :]: v for k, v in self.state.items() if k.startswith(head)}


def _entry(name: str) -> zipfile.ZipInfo:
    info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    return info


def save_checkpoint(
    path: str | Path,
    state: Mapping[str, torch.Tensor],
    *,
    kind: CheckpointKind,
    config: dict[str, Any],
    seed: int,
    vocab_hash: str = "",
    tokenizer_hash: str = "",
    labels: list[str] | None = None,
    tokens: list[str] | None = None,
) -> CheckpointManifest:
    """Write *state* (name -> tensor, kept in the given order) to *path*."""
    specs = []
    for name, tensor in state.items():
        if tensor.dtype not in _DTYPE_NAMES:
            raise CheckpointError(f"unsupported dtype {tensor.dtype} for array {name!r}")
        specs.append(
            ArraySpec(name=name, shape=list(tensor.shape), dtype=_DTYPE_NAMES[tensor.dtype])
        )
    manifest = CheckpointManifest(
        format_version=FORMAT_VERSION,
        kind=kind,
        config=config,
        seed=seed,
        vocab_hash=vocab_hash,
        tokenizer_hash=tokenizer_hash,
        labels=labels or [],
        tokens=tokens or [],
        digest=state_digest(state),
        arrays=specs,
    )
    _write(Path(path), manifest, state)
    return manifest


def write_checkpoint(path: str | Path, checkpoint: Checkpoint) -> None:
    """Write a loaded checkpoint back unchanged; the bytes match the original file."""
    _write(Path(path), checkpoint.manifest, checkpoint.state)


def _write(out: Path, manifest: CheckpointManifest, state: Mapping[str, torch.Tensor]) -> None:
    out.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(out, "w") as zf:
        zf.writestr(_entry("manifest.json"), canonical_bytes(manifest.model_dump(mode="json")))
        for meta in manifest.arrays:
            zf.writestr(_entry(f"arrays/{meta.name}.bin"), tensor_bytes(state[meta.name]))
    logger.info("checkpoint_saved", path=str(out), kind=manifest.kind, arrays=len(manifest.arrays))


def load_checkpoint(path: str | Path, *, kind: CheckpointKind | None = None) -> Checkpoint:
    src = Path(path)
    if not src.is_file():
        raise CheckpointError(f"checkpoint not found: {src}", path=str(src))
    try:
        zf = zipfile.ZipFile(src)
    except zipfile.BadZipFile as exc:
        raise CheckpointError(f"not a checkpoint archive: {src}", path=str(src)) from exc
    with zf:
        names = set(zf.namelist())
        if "manifest.json" not in names:
            raise CheckpointError(f"{src}: missing manifest.json", path=str(src))
        try:
            manifest = CheckpointManifest.model_validate_json(zf.read("manifest.json"))
        except ValidationError as exc:
            raise CheckpointError(f"{src}: invalid manifest: {exc}", path=str(src)) from exc
        if manifest.format_version != FORMAT_VERSION:
            raise CheckpointError(
                f"{src}: format version {manifest.format_version}, expected {FORMAT_VERSION}",
                path=str(src),
            )
        if kind is not None and manifest.kind != kind:
            raise CheckpointError(f"{src}: expected a {kind} checkpoint, got {manifest.kind}")
        state: dict[str, torch.Tensor] = {}
        for meta in manifest.arrays:
            entry = f"arrays/{meta.name}.bin"
            if entry not in names:
                raise CheckpointError(f"{src}: missing array {meta.name!r}", array=meta.name)
            blob = zf.read(entry)
            if len(blob) != meta.nbytes:
                raise CheckpointError(
                    f"{src}: array {meta.name!r} has {len(blob)} bytes, "
                    f"expected {meta.nbytes} for shape {meta.shape}",
                    array=meta.name,
                )
            array = np.frombuffer(blob, dtype=np.dtype(meta.dtype).newbyteorder("<"))
            state[meta.name] = torch.from_numpy(
                array.astype(np.dtype(meta.dtype), copy=True).reshape(meta.shape)
            )
    if state_digest(state) != manifest.digest:
        raise CheckpointError(f"{src}: parameter digest does not match manifest", path=str(src))
    return Checkpoint(manifest=manifest, state=state)
