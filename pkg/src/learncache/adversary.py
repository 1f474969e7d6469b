"""Sampler for the lower-bound input family with t clean pages per phase.

Pages are ``1..k+t``. Phase r requests ``random_part_len`` iid uniform draws
from ``C_r | S_r`` and then every page of ``C_r | S_r`` once in increasing
order. ``C_1 = {1..t}``, ``S_1 = {t+1..k}``; afterwards ``C_r`` is the set of
pages missing from phase r-1 and ``S_r`` is a uniform (k-t)-subset of the
pages of phase r-1.

Predictions carry no information about the random draws: inside a random part
every page is predicted to return at the next step, and each page of the
ordered copy is predicted to return at the last step of the following phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .opt import belady_cost
from .trace import Trace, l1_error, write_trace


def default_random_part_len(k: int) -> int:
    return math.ceil(3 * k * math.log(k))


@dataclass(frozen=True)
class AdversarialInstance:
    trace: Trace
    k: int
    t: int
    n: int
    seed: int
    random_part_len: int
    clean_sets: tuple[frozenset, ...]
    stale_sets: tuple[frozenset, ...]

    @property
    def phase_len_m(self) -> int:
        return self.random_part_len + self.k

    def phase_bounds(self) -> list[tuple[int, int]]:
        m = self.phase_len_m
        return [(r * m + 1, (r + 1) * m) for r in range(self.n)]


def sample_omega(k: int, t: int, n: int, seed: int,
                 random_part_len: int | None = None) -> AdversarialInstance:
    if k < 2:
        raise ParameterError(f"k must be >= 2, got {k}")
    if not 1 <= t <= k:
        raise ParameterError(f"t must lie in [1, k], got t={t}, k={k}")
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if random_part_len is None:
        random_part_len = default_random_part_len(k)
    if random_part_len < 0:
        raise ParameterError("random_part_len must be >= 0")

    rng = np.random.default_rng(seed)
    universe = frozenset(range(1, k + t + 1))
    clean = frozenset(range(1, t + 1))
    stale = frozenset(range(t + 1, k + 1))
    m = random_part_len + k
    clean_sets, stale_sets = [], []
    requests: list[int] = []
    predictions: list[int] = []
    for r in range(n):
        if r > 0:
            previous = clean | stale
            clean = universe - previous
            stale = frozenset(rng.choice(sorted(previous), size=k - t, replace=False).tolist())
        clean_sets.append(clean)
        stale_sets.append(stale)
        pages = np.array(sorted(clean | stale))
        draws = pages[rng.integers(0, k, size=random_part_len)].tolist()
        start = r * m  # time of the last request of the previous phase
        requests.extend(draws)
        predictions.extend(range(start + 2, start + random_part_len + 2))
        requests.extend(pages.tolist())
        # last step of the next phase; for the final phase a virtual phase n+1
        predictions.extend([(r + 2) * m] * k)

    return AdversarialInstance(
        trace=Trace(tuple(requests), tuple(predictions)),
        k=k, t=t, n=n, seed=seed, random_part_len=random_part_len,
        clean_sets=tuple(clean_sets), stale_sets=tuple(stale_sets),
    )


@dataclass(frozen=True)
class InstanceStats:
    eta: int
    opt_cost: int
    eta_over_opt: Fraction


def instance_stats(inst: AdversarialInstance) -> InstanceStats:
    eta = l1_error(inst.trace).eta
    opt = belady_cost(inst.trace, inst.k)
    return InstanceStats(eta, opt, Fraction(eta, opt))


def eta_cover(k: int, n: int) -> float:
    """Instance-level cover for the O(n k^2 log k) error of a sampled instance."""
    return 8 * n * k * k * math.log(k)


def write_instance(inst: AdversarialInstance, path: str | Path) -> Path:
    """Write the two-column trace and a ``key=value`` sidecar next to it."""
    path = Path(path)
    write_trace(inst.trace, path)
    meta = path.with_name(path.name + ".meta")
    meta.write_text(
        f"k={inst.k}\nt={inst.t}\nn={inst.n}\nseed={inst.seed}\n"
        f"phase_len_m={inst.phase_len_m}\nrandom_part_len={inst.random_part_len}\n",
        encoding="utf-8")
    return meta


def read_metadata(path: str | Path) -> dict[str, int]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            key, _, value = line.partition("=")
            out[key.strip()] = int(value)
    return out
