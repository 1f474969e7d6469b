"""Request traces, next-arrival predictions, phases and the l1 prediction error.

Time is the 1-indexed request position. Internally sequences are stored as
0-indexed Python tuples, so ``requests[i - 1]`` is the request at time ``i``
and ``true_next[i - 1]`` is its next arrival time (``n + 1`` if the page is
never requested again).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError, TraceFormatError


def compute_true_next(requests: Sequence[int]) -> list[int]:
    """Next arrival time of each request, ``n + 1`` when it never reappears."""
    n = len(requests)
    if n == 0:
        raise ParameterError("requests must be non-empty")
    nxt = [0] * n
    last_seen: dict[int, int] = {}
    for pos in range(n - 1, -1, -1):
        page = requests[pos]
        nxt[pos] = last_seen.get(page, n + 1)
        last_seen[page] = pos + 1
    return nxt


def perfect_predictions(requests: Sequence[int]) -> list[int]:
    return compute_true_next(requests)


@dataclass(frozen=True)
class PhaseDecomposition:
    """Greedy phases: each extends as long as it holds at most k distinct pages.

    ``boundaries`` holds inclusive 1-indexed ``(start, end)`` pairs.
    """

    boundaries: tuple[tuple[int, int], ...]
    distinct_per_phase: tuple[frozenset, ...]

    def __len__(self) -> int:
        return len(self.boundaries)

    @property
    def starts(self) -> tuple[int, ...]:
        return tuple(start for start, _ in self.boundaries)

    def phase_index(self) -> list[int]:
        """0-based phase index of each request position."""
        out = []
        for r, (start, end) in enumerate(self.boundaries):
            out.extend([r] * (end - start + 1))
        return out


def compute_phases(requests: Sequence[int], k: int) -> PhaseDecomposition:
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    boundaries: list[tuple[int, int]] = []
    sets: list[frozenset] = []
    current: set = set()
    start = 1
    for pos, page in enumerate(requests, start=1):
        if page not in current and len(current) == k:
            boundaries.append((start, pos - 1))
            sets.append(frozenset(current))
            current = set()
            start = pos
        current.add(page)
    if requests:
        boundaries.append((start, len(requests)))
        sets.append(frozenset(current))
    return PhaseDecomposition(tuple(boundaries), tuple(sets))


@dataclass(frozen=True)
class Trace:
    requests: tuple[int, ...]
    predictions: tuple[int, ...] | None = None
    true_next: tuple[int, ...] = field(init=False)
    _memo: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        reqs = tuple(int(p) for p in self.requests)
        if any(p < 0 for p in reqs):
            raise ParameterError("page ids must be non-negative integers")
        object.__setattr__(self, "requests", reqs)
        object.__setattr__(self, "true_next", tuple(compute_true_next(reqs)))
        if self.predictions is not None:
            preds = tuple(int(h) for h in self.predictions)
            if len(preds) != len(reqs):
                raise ParameterError(
                    f"{len(preds)} predictions for {len(reqs)} requests")
            object.__setattr__(self, "predictions", preds)

    def __len__(self) -> int:
        return len(self.requests)

    @classmethod
    def perfect(cls, requests: Iterable[int]) -> "Trace":
        reqs = tuple(requests)
        return cls(reqs, tuple(compute_true_next(reqs)))

    def with_predictions(self, predictions: Sequence[int] | None) -> "Trace":
        return Trace(self.requests, None if predictions is None else tuple(predictions))

    def phases(self, k: int) -> PhaseDecomposition:
        key = ("phases", k)
        if key not in self._memo:
            self._memo[key] = compute_phases(self.requests, k)
        return self._memo[key]

    def distinct_after(self, k: int) -> tuple[int, ...]:
        """For each position, distinct pages requested strictly later in its phase."""
        key = ("distinct_after", k)
        if key not in self._memo:
            out = [0] * len(self.requests)
            for start, end in self.phases(k).boundaries:
                later: set = set()
                for pos in range(end, start - 1, -1):
                    out[pos - 1] = len(later)
                    later.add(self.requests[pos - 1])
            self._memo[key] = tuple(out)
        return self._memo[key]


@dataclass(frozen=True)
class ErrorReport:
    eta: int
    per_phase_eta: tuple[int, ...]


def l1_error(trace: Trace, phases: PhaseDecomposition | None = None) -> ErrorReport:
    """Total and per-phase l1 error; a prediction counts toward the phase it was made in."""
    if trace.predictions is None:
        raise ParameterError("trace has no predictions")
    if phases is None:
        phases = PhaseDecomposition(((1, len(trace)),), (frozenset(trace.requests),))
    per_phase = []
    for start, end in phases.boundaries:
        per_phase.append(sum(abs(trace.predictions[i] - trace.true_next[i])
                             for i in range(start - 1, end)))
    return ErrorReport(sum(per_phase), tuple(per_phase))


@dataclass(frozen=True)
class NoiseModel:
    """Synthetic prediction noise.

    ``additive_uniform``: ``y + U{-w..w}``. ``additive_geometric``: ``y +/- Geom(p)``
    with a fair random sign (Geom counts trials, so it is always >= 1).
    ``scaled``: ``y + round(sigma * z)`` with ``z`` standard normal.
    """

    kind: str
    param: float

    KINDS = ("additive_uniform", "additive_geometric", "scaled")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ParameterError(f"unknown noise kind {self.kind!r}")
        if self.kind == "additive_uniform":
            if self.param < 0 or self.param != int(self.param):
                raise ParameterError(f"uniform width must be a non-negative integer, got {self.param}")
        elif self.kind == "additive_geometric":
            if not 0 < self.param <= 1:
                raise ParameterError(f"geometric p must lie in (0, 1], got {self.param}")
        elif self.param < 0 or not math.isfinite(self.param):
            raise ParameterError(f"scale sigma must be >= 0, got {self.param}")

    @classmethod
    def parse(cls, text: str) -> "NoiseModel":
        m = re.fullmatch(r"\s*(\w+)\s*\(\s*([-+0-9.eE]+)\s*\)\s*", text)
        if not m:
            raise ParameterError(f"cannot parse noise model {text!r}")
        return cls(m.group(1), float(m.group(2)))

    def __str__(self) -> str:
        p = int(self.param) if self.param == int(self.param) else self.param
        return f"{self.kind}({p})"


def noisy_predictions(requests: Sequence[int], noise: NoiseModel, seed: int) -> list[int]:
    y = np.asarray(compute_true_next(requests), dtype=np.int64)
    rng = np.random.default_rng(seed)
    n = len(y)
    if noise.kind == "additive_uniform":
        w = int(noise.param)
        delta = rng.integers(-w, w + 1, size=n)
    elif noise.kind == "additive_geometric":
        delta = rng.geometric(noise.param, size=n) * rng.choice((-1, 1), size=n)
    else:
        delta = np.rint(noise.param * rng.standard_normal(n)).astype(np.int64)
    return (y + delta).tolist()


def read_trace(path: str | Path) -> Trace:
    """Parse the line-oriented trace format: ``page [prediction]`` per line, ``#`` comments."""
    requests: list[int] = []
    predictions: list[int] = []
    columns = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) > 2 or (columns is not None and len(parts) != columns):
                raise TraceFormatError(f"{path}:{lineno}: expected {columns or '1 or 2'} columns")
            columns = len(parts)
            try:
                requests.append(int(parts[0]))
                if columns == 2:
                    predictions.append(int(parts[1]))
            except ValueError:
                raise TraceFormatError(f"{path}:{lineno}: non-integer field in {line!r}") from None
            if requests[-1] < 0:
                raise TraceFormatError(f"{path}:{lineno}: negative page id")
    if not requests:
        raise TraceFormatError(f"{path}: no requests")
    return Trace(tuple(requests), tuple(predictions) if columns == 2 else None)


def write_trace(trace: Trace, path: str | Path, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        if trace.predictions is None:
            fh.writelines(f"{p}\n" for p in trace.requests)
        else:
            fh.writelines(f"{p} {h}\n" for p, h in zip(trace.requests, trace.predictions))
