"""Online cache state machine with phase, marking and eviction-chain bookkeeping.

The engine is policy-agnostic: on a miss with a full cache it asks an
eviction rule for a victim. Phases are the greedy, algorithm-independent
ones from :func:`learncache.trace.compute_phases`, so marks, the initial
snapshot and provenance tags roll over at identical times for every policy.

Every miss belongs to exactly one eviction chain. A chain is opened by the
first arrival in a phase of a page that was not cached when the phase began
(a non-initial arrival); any other miss is the reappearance of a page evicted
earlier in the same phase and extends the chain that evicted it.
"""

from __future__ import annotations

import random
from bisect import bisect_left
from dataclasses import dataclass

from .errors import MissingPredictionsError
from .opt import count_clean
from .trace import Trace

NON_INITIAL = "non_initial"
CHAIN_SECOND = "chain_second"
OTHER = "other"


class MarkingInvariantError(AssertionError):
    """A marker-style eviction was requested with every cached page marked."""


@dataclass(frozen=True)
class ChainRecord:
    phase_index: int
    head_time: int
    length: int
    n_star: int


@dataclass(frozen=True)
class SimReport:
    misses: int
    per_phase_misses: tuple[int, ...]
    chains: tuple[ChainRecord, ...]
    chain_count_C: int
    clean_count_L: int
    sum_n_star: int
    marked_evictions: int = 0
    switch_times: tuple[int, ...] = ()
    shadow_misses: tuple[int, ...] = ()


class _Chain:
    __slots__ = ("phase", "head_time", "length", "first_victim", "n_star", "reappeared")

    def __init__(self, phase: int, head_time: int):
        self.phase = phase
        self.head_time = head_time
        self.length = 0
        self.first_victim = None
        self.n_star = 0
        self.reappeared = False


class CacheSim:
    """Steps one policy through a trace.

    ``rule`` must provide ``needs_predictions`` and
    ``victim(sim, page, incoming_class, chain_len, is_clean) -> page``.
    """

    def __init__(self, trace: Trace, k: int, rule, rng: random.Random):
        if rule.needs_predictions and trace.predictions is None:
            raise MissingPredictionsError(f"{rule.name} needs predictions")
        self.trace = trace
        self.k = k
        self.rule = rule
        self.rng = rng
        self.requests = trace.requests
        self.preds = trace.predictions
        phases = trace.phases(k)
        self._phase_sets = phases.distinct_per_phase
        self._starts = frozenset(start - 1 for start in phases.starts)
        self._distinct_after = trace.distinct_after(k)

        # Containers below are mutated in place only; run() caches references.
        self.cache: set[int] = set()
        self.seen: set[int] = set()  # requested this phase; a cached page is marked iff seen
        self.unmarked: list[int] = []  # sorted by page id
        self.last_pred: dict[int, int] = {}
        self.last_time: dict[int, int] = {}
        self.provenance: dict[int, bool] = {}  # evicted by a non-initial arrival this phase
        self.chain_of: dict[int, _Chain] = {}
        self.phase_initial: frozenset = frozenset()
        self.prev_distinct: frozenset = frozenset()

        self.phase = -1
        self.time = 0
        self.misses = 0
        self.per_phase_misses: list[int] = []
        self.chains: list[_Chain] = []
        self.marked_evictions = 0
        self.last_victim = None

    # -- helpers for eviction rules -------------------------------------------------

    def random_unmarked(self) -> int:
        unmarked = self.unmarked
        if not unmarked:
            raise MarkingInvariantError(f"no unmarked page at time {self.time}")
        return unmarked[self.rng.randrange(len(unmarked))]

    def max_pred_unmarked(self) -> int:
        """Unmarked page with the latest most-recent prediction, smaller id on ties."""
        if not self.unmarked:
            raise MarkingInvariantError(f"no unmarked page at time {self.time}")
        # max() keeps the first maximum and unmarked is sorted ascending
        return max(self.unmarked, key=self.last_pred.__getitem__)

    def max_pred_cached(self) -> int:
        lp = self.last_pred
        return max(self.cache, key=lambda p: (lp[p], -p))

    def random_cached(self) -> int:
        entries = sorted(self.cache)
        return entries[self.rng.randrange(len(entries))]

    def least_recent(self) -> int:
        return min(self.cache, key=self.last_time.__getitem__)

    # -- state machine --------------------------------------------------------------

    def _new_phase(self) -> None:
        self.phase += 1
        self.per_phase_misses.append(0)
        self.seen.clear()
        self.unmarked[:] = sorted(self.cache)
        self.phase_initial = frozenset(self.cache)
        self.prev_distinct = self._phase_sets[self.phase - 1] if self.phase else frozenset()
        self.provenance.clear()
        self.chain_of.clear()

    def _miss(self, pos: int, page: int) -> None:
        self.misses += 1
        self.per_phase_misses[-1] += 1
        first_arrival = page not in self.seen
        if first_arrival and page not in self.phase_initial:
            cls = NON_INITIAL
            chain = _Chain(self.phase, pos + 1)
            self.chains.append(chain)
            chain_len = 0
        else:
            chain = self.chain_of[page]
            cls = CHAIN_SECOND if self.provenance.get(page) else OTHER
            chain_len = chain.length
            if chain.first_victim == page and not chain.reappeared:
                chain.reappeared = True
                chain.n_star = self._distinct_after[pos]
        chain.length += 1
        if first_arrival:
            self.seen.add(page)

        cache = self.cache
        if len(cache) >= self.k:
            is_clean = first_arrival and page not in self.prev_distinct
            victim = self.rule.victim(self, page, cls, chain_len, is_clean)
            if victim not in cache:
                raise RuntimeError(f"{self.rule.name} chose uncached victim {victim}")
            if victim in self.seen:
                self.marked_evictions += 1
            else:
                unmarked = self.unmarked
                del unmarked[bisect_left(unmarked, victim)]
            cache.remove(victim)
            self.chain_of[victim] = chain
            self.provenance[victim] = cls == NON_INITIAL
            if chain_len == 0:
                chain.first_victim = victim
            self.last_victim = victim
        cache.add(page)

    def step(self) -> bool:
        """Serve the next request; returns True on a hit."""
        pos = self.time
        self.time += 1
        if pos in self._starts:
            self._new_phase()
        page = self.requests[pos]
        self.last_victim = None
        hit = page in self.cache
        if hit:
            if page not in self.seen:
                self.seen.add(page)
                del self.unmarked[bisect_left(self.unmarked, page)]
        else:
            self._miss(pos, page)
        self.last_time[page] = pos
        if self.preds is not None:
            self.last_pred[page] = self.preds[pos]
        return hit

    def run(self) -> SimReport:
        # Same transitions as step(), with the hit path inlined.
        requests, preds, starts = self.requests, self.preds, self._starts
        cache, seen, unmarked = self.cache, self.seen, self.unmarked
        last_time, last_pred = self.last_time, self.last_pred
        for pos in range(self.time, len(requests)):
            self.time = pos + 1
            if pos in starts:
                self._new_phase()
            page = requests[pos]
            if page in cache:
                if page not in seen:
                    seen.add(page)
                    del unmarked[bisect_left(unmarked, page)]
            else:
                self._miss(pos, page)
            last_time[page] = pos
            if preds is not None:
                last_pred[page] = preds[pos]
        return self.report()

    def report(self, **extra) -> SimReport:
        chains = tuple(ChainRecord(c.phase, c.head_time, c.length, c.n_star)
                       for c in self.chains)
        return SimReport(
            misses=self.misses,
            per_phase_misses=tuple(self.per_phase_misses),
            chains=chains,
            chain_count_C=len(chains),
            clean_count_L=count_clean(self.trace, self.k),
            sum_n_star=sum(c.n_star for c in chains),
            marked_evictions=self.marked_evictions,
            **extra,
        )
