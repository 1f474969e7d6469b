"""Checks for two standalone claims: inversions versus l1 distance to a strictly
increasing sequence, and the truncated-geometric occupation times of distinct
small values among uniform draws."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError


def inversions(a_seq: Sequence[int]) -> int:
    """Pairs ``i < j`` with ``a[i] >= a[j]``, counted by merge sort.

    Equal values count as inversions. During each merge the right run's head is
    taken whenever it is ``<=`` the left run's head, so every left element still
    pending is ``>=`` it and is counted at that moment.
    """
    items = list(a_seq)
    n = len(items)
    count = 0
    width = 1
    buf = items[:]
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, out = lo, mid, lo
            while i < mid and j < hi:
                if items[j] <= items[i]:
                    buf[out] = items[j]
                    count += mid - i
                    j += 1
                else:
                    buf[out] = items[i]
                    i += 1
                out += 1
            buf[out:hi] = items[i:mid] if i < mid else items[j:hi]
        items, buf = buf, items
        width *= 2
    return count


def inversions_quadratic(a_seq: Sequence[int]) -> int:
    a = list(a_seq)
    return sum(1 for i in range(len(a)) for j in range(i + 1, len(a)) if a[i] >= a[j])


def l1_cost(a_seq: Sequence[int], m_seq: Sequence[int]) -> int:
    if len(a_seq) != len(m_seq):
        raise ParameterError(f"length mismatch: {len(a_seq)} vs {len(m_seq)}")
    return sum(abs(a - m) for a, m in zip(a_seq, m_seq))


@dataclass(frozen=True)
class InversionInstance:
    m_seq: tuple[int, ...]
    a_seq: tuple[int, ...]

    def __post_init__(self):
        if len(self.m_seq) != len(self.a_seq):
            raise ParameterError("m_seq and a_seq must have equal length")
        if any(x >= y for x, y in zip(self.m_seq, self.m_seq[1:])):
            raise ParameterError("m_seq must be strictly increasing")


def check_inversion_lemma(inst: InversionInstance) -> bool:
    return inversions(inst.a_seq) <= 2 * l1_cost(inst.a_seq, inst.m_seq)


@dataclass(frozen=True)
class BoundedGeomResult:
    k: int
    l: int
    trials: int
    draws: int
    empirical_means: tuple[float, ...]
    stderrs: tuple[float, ...]
    floors: tuple[float, ...]
    violations: tuple[int, ...]


def occupation_times(k: int, l: int, trials: int, draws: int,
                     rng: np.random.Generator) -> np.ndarray:
    """``T[trial, j]`` = number of prefix lengths ``i in 0..draws`` with exactly
    ``j`` distinct values of ``1..l`` among ``X_1..X_i``; the empty prefix counts."""
    x = rng.integers(1, k + 1, size=(trials, draws))
    first = np.full((trials, l + 1), draws + 1, dtype=np.int64)
    rows = np.arange(trials)
    for i in range(draws - 1, -1, -1):
        col = x[:, i]
        hit = col <= l
        first[rows[hit], col[hit]] = i + 1
    arrival = np.sort(first[:, 1:], axis=1)  # times at which Y steps up
    edges = np.concatenate([np.zeros((trials, 1), dtype=np.int64), arrival], axis=1)
    return np.diff(np.minimum(edges, draws + 1), axis=1)


def check_bounded_geom(k: int, l: int, trials: int, seed: int,
                       draws: int | None = None, sigmas: float = 3.0) -> BoundedGeomResult:
    """Monte Carlo of ``E[T_j] >= k/(l-j) - 1/k``; flags j where the sample mean
    plus ``sigmas`` standard errors is still below the floor."""
    if not 2 <= l <= k:
        raise ParameterError(f"need 2 <= l <= k, got l={l}, k={k}")
    if trials < 1000:
        raise ParameterError(f"trials must be >= 1000, got {trials}")
    if draws is None:
        draws = math.ceil(3 * k * math.log(k))
    t = occupation_times(k, l, trials, draws, np.random.default_rng(seed))
    means = t.mean(axis=0)
    stderr = t.std(axis=0, ddof=1) / math.sqrt(trials)
    floors = np.array([k / (l - j) - 1 / k for j in range(l)])
    violations = tuple(int(j) for j in np.nonzero(means + sigmas * stderr < floors)[0])
    return BoundedGeomResult(k, l, trials, draws, tuple(means.tolist()),
                             tuple(stderr.tolist()), tuple(floors.tolist()), violations)
