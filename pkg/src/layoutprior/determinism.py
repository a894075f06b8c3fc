"""Seeding and serial-execution switches for bit-reproducible runs."""

from __future__ import annotations

import random

import numpy as np
import torch

__all__ = ["seed_everything", "torch_generator"]


def seed_everything(seed: int, *, serial: bool = True) -> None:
    """Seed python, numpy and torch; in serial mode pin torch to one thread."""
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)
    if serial:
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)


def torch_generator(seed: int) -> torch.Generator:
    """A CPU generator independent of the global torch RNG."""
    gen = torch.Generator()
    gen.manual_seed(seed)
    return gen
