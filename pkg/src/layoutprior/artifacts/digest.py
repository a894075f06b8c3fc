"""Parameter digests used to prove an encoder was never touched."""

from __future__ import annotations

import hashlib
from collections.abc import Mapping

import numpy as np
import torch
from torch import nn

__all__ = ["tensor_bytes", "param_digest", "state_digest", "count_parameters"]


def tensor_bytes(tensor: torch.Tensor) -> bytes:
    """Little-endian C-order bytes of a detached CPU copy."""
    array = tensor.detach().cpu().contiguous().numpy()
    return np.ascontiguousarray(array, dtype=array.dtype.newbyteorder("<")).tobytes()


def state_digest(state: Mapping[str, torch.Tensor], prefix: str | None = None) -> str:
    """sha256 over (name, dtype, shape, bytes) for every entry in order.

    With *prefix*, only names starting with it are hashed.
    """
    h = hashlib.sha256()
    for name, tensor in state.items():
        if prefix is not None and not name.startswith(prefix):
            continue
        h.update(name.encode("utf-8"))
        h.update(str(tensor.dtype).encode("ascii"))
        h.update(repr(tuple(tensor.shape)).encode("ascii"))
        h.update(tensor_bytes(tensor))
    return h.hexdigest()


def param_digest(model: nn.Module, prefix: str | None = None) -> str:
    """Digest of model.state_dict() (buffers included) in registration order."""
    return state_digest(model.state_dict(), prefix)


def count_parameters(model: nn.Module, *, trainable_only: bool = False) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad or not trainable_only)
