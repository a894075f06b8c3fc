"""Convolutional GRU layout encoder: e^I_t = ConvGRU(I_{t-1}, e^I_{t-1})."""

from __future__ import annotations

import math

import torch
from torch import nn

__all__ = ["ConvStem", "ConvGRUCell", "LayoutEncoder", "glorot_init_"]


def glorot_init_(module: nn.Module, generator: torch.Generator) -> None:
    """Seeded Glorot-uniform weights and zero biases for every conv/linear layer."""
    with torch.no_grad():
        for layer in module.modules():
            if isinstance(layer, nn.Conv2d | nn.Linear):
                receptive = layer.weight[0][0].numel() if layer.weight.dim() > 2 else 1
                fan_in = layer.weight.shape[1] * receptive
                fan_out = layer.weight.shape[0] * receptive
                bound = math.sqrt(6.0 / (fan_in + fan_out))
                layer.weight.uniform_(-bound, bound, generator=generator)
                if layer.bias is not None:
                    layer.bias.zero_()


class ConvStem(nn.Module):
    """Strided 3x3 convolutions taking the W x H raster down to the state grid."""

    def __init__(self, in_channels: int, channels: int, raster: int, grid: int) -> None:
        super().__init__()
        if raster % grid or (raster // grid) & (raster // grid - 1):
            raise ValueError(f"raster {raster} must be a power-of-two multiple of grid {grid}")
        steps = int(math.log2(raster // grid))
        layers: list[nn.Module] = []
        if steps == 0:
            layers.append(nn.Conv2d(in_channels, channels, kernel_size=1))
        for i in range(steps):
            layers.append(
                nn.Conv2d(in_channels if i == 0 else channels, channels, 3, stride=2, padding=1)
            )
            layers.append(nn.GELU())
        self.net = nn.Sequential(*layers)

    def forward(self, raster: torch.Tensor) -> torch.Tensor:
        return self.net(raster)  # type: ignore[no-any-return]


class ConvGRUCell(nn.Module):
    """GRU gating where every affine map is a same-padded convolution."""

    def __init__(self, in_channels: int, hidden_channels: int, kernel_size: int = 3) -> None:
        super().__init__()
        pad = kernel_size // 2
        joint = in_channels + hidden_channels
        self.gates = nn.Conv2d(joint, 2 * hidden_channels, kernel_size, padding=pad)
        self.candidate = nn.Conv2d(joint, hidden_channels, kernel_size, padding=pad)

    def forward(self, x: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        update, reset = torch.sigmoid(self.gates(torch.cat([x, h], dim=1))).chunk(2, dim=1)
        cand = torch.tanh(self.candidate(torch.cat([x, reset * h], dim=1)))
        return (1 - update) * h + update * cand


class LayoutEncoder(nn.Module):
    """Raster stem followed by one ConvGRU step per decoding step."""

    def __init__(self, num_classes: int, channels: int, raster: int, grid: int) -> None:
        super().__init__()
        self.num_classes = num_classes
        self.channels = channels
        self.raster = raster
        self.grid = grid
        self.stem = ConvStem(num_classes, channels, raster, grid)
        self.cell = ConvGRUCell(channels, channels)

    def initial_state(self, batch_size: int, *, dtype: torch.dtype | None = None) -> torch.Tensor:
        """e^I_0, the all-zero state."""
        dtype = dtype or self.cell.candidate.weight.dtype
        return torch.zeros(batch_size, self.channels, self.grid, self.grid, dtype=dtype)

    def forward(self, raster: torch.Tensor, prev_state: torch.Tensor) -> torch.Tensor:
        expected_raster = (self.num_classes, self.raster, self.raster)
        expected_state = (self.channels, self.grid, self.grid)
        if tuple(raster.shape[1:]) != expected_raster:
            raise ValueError(f"raster shape {tuple(raster.shape[1:])} != {expected_raster}")
        if tuple(prev_state.shape[1:]) != expected_state or prev_state.shape[0] != raster.shape[0]:
            raise ValueError(f"state shape {tuple(prev_state.shape)} incompatible with raster")
        return self.cell(self.stem(raster), prev_state)  # type: ignore[no-any-return]
