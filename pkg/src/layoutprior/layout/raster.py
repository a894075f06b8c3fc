"""Binary C x W x H layout raster I_t of the boxes placed so far."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import torch

if TYPE_CHECKING:
    from collections.abc import Sequence

    from layoutprior.data.types import LabeledBox

__all__ = ["pixel_centers", "rasterize", "rasterize_batch"]


def pixel_centers(n: int) -> np.ndarray:
    """Normalized centres (i + 0.5) / n of n pixels along one axis."""
    return (np.arange(n, dtype=np.float64) + 0.5) / n


def rasterize(boxes: Sequence[LabeledBox], C: int, W: int, H: int) -> np.ndarray:
    """occupancy[l, i, j] = 1 iff a box of label l covers the centre of pixel (i, j).

    Coverage uses the half-open extent [x, x + w) x [y, y + h); overlapping
    boxes of the same label union. No boxes gives the blank layout.
    """
    if W < 1 or H < 1:
        raise ValueError("raster dimensions must be >= 1")
    occupancy = np.zeros((C, W, H), dtype=np.uint8)
    cx, cy = pixel_centers(W), pixel_centers(H)
    for box in boxes:
        if not 0 <= box.label < C:
            raise ValueError(f"box label {box.label} outside [0, {C})")
        in_x = (box.x <= cx) & (cx < box.x + box.w)
        in_y = (box.y <= cy) & (cy < box.y + box.h)
        occupancy[box.label] |= np.outer(in_x, in_y).astype(np.uint8)
    return occupancy


def rasterize_batch(
    layouts: Sequence[Sequence[LabeledBox]],
    C: int,
    W: int,
    H: int,
    *,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """Stack rasters of several layouts into a (B, C, W, H) tensor."""
    if not layouts:
        return torch.zeros((0, C, W, H), dtype=dtype)
    stacked = np.stack([rasterize(boxes, C, W, H) for boxes in layouts])
    return torch.from_numpy(stacked).to(dtype)
