"""Synthetic request generators used by the benchmark harness."""

from __future__ import annotations

import numpy as np

from .errors import ParameterError


def uniform_random(universe_size: int, length: int, seed: int) -> list[int]:
    if universe_size < 1 or length < 1:
        raise ParameterError("universe_size and length must be >= 1")
    rng = np.random.default_rng(seed)
    return rng.integers(0, universe_size, size=length).tolist()


def zipf(universe_size: int, length: int, exponent: float, seed: int) -> list[int]:
    """Bounded Zipf over ``0..universe_size-1``; page ``i`` has weight ``(i+1)**-exponent``.

    Page ids are shuffled so popularity is not aligned with id order, which
    would otherwise interact with id-based tie breaking.
    """
    if universe_size < 1 or length < 1:
        raise ParameterError("universe_size and length must be >= 1")
    if exponent < 0:
        raise ParameterError("exponent must be >= 0")
    rng = np.random.default_rng(seed)
    weights = np.arange(1, universe_size + 1, dtype=float) ** -exponent
    weights /= weights.sum()
    ranks = rng.choice(universe_size, size=length, p=weights)
    return rng.permutation(universe_size)[ranks].tolist()
