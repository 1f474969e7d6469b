"""Offline optimum (Belady), an exhaustive oracle for it, and the clean-page count."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .errors import InstanceTooLargeError, ParameterError
from .trace import Trace

BRUTE_FORCE_MAX_N = 14
BRUTE_FORCE_MAX_PAGES = 6
BRUTE_FORCE_MAX_K = 4


@dataclass(frozen=True)
class OptReport:
    opt_cost: int
    clean_count: int


def belady_cost(trace: Trace, k: int) -> int:
    """Misses of furthest-in-future eviction, which is optimal for unweighted paging.

    Ties between pages that are never requested again go to the smaller page id.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    requests, true_next = trace.requests, trace.true_next
    cache: dict[int, int] = {}  # page -> next request time
    heap: list[tuple[int, int]] = []  # (-next, page), lazily invalidated
    misses = 0
    for pos, page in enumerate(requests):
        nxt = true_next[pos]
        if page not in cache:
            misses += 1
            if len(cache) == k:
                while True:
                    neg_next, victim = heapq.heappop(heap)
                    if cache.get(victim) == -neg_next:
                        break
                del cache[victim]
        cache[page] = nxt
        heapq.heappush(heap, (-nxt, page))
    return misses


def brute_force_opt(trace: Trace, k: int) -> int:
    """Exact minimum misses by dynamic programming over reachable cache contents."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    n_pages = len(set(trace.requests))
    if (len(trace) > BRUTE_FORCE_MAX_N or n_pages > BRUTE_FORCE_MAX_PAGES
            or k > BRUTE_FORCE_MAX_K):
        raise InstanceTooLargeError(
            f"n={len(trace)}, pages={n_pages}, k={k} exceeds "
            f"({BRUTE_FORCE_MAX_N}, {BRUTE_FORCE_MAX_PAGES}, {BRUTE_FORCE_MAX_K})")
    states: dict[frozenset, int] = {frozenset(): 0}
    for page in trace.requests:
        nxt: dict[frozenset, int] = {}
        for cached, cost in states.items():
            if page in cached:
                options = [(cached, cost)]
            elif len(cached) < k:
                options = [(cached | {page}, cost + 1)]
            else:
                options = [((cached - {v}) | {page}, cost + 1) for v in cached]
            for state, c in options:
                if c < nxt.get(state, c + 1):
                    nxt[state] = c
        states = nxt
    return min(states.values())


def count_clean(trace: Trace, k: int) -> int:
    """Pages of each phase absent from the previous phase; all of phase 1 counts."""
    total = 0
    previous: frozenset = frozenset()
    for distinct in trace.phases(k).distinct_per_phase:
        total += len(distinct - previous)
        previous = distinct
    return total


def opt_report(trace: Trace, k: int) -> OptReport:
    return OptReport(belady_cost(trace, k), count_clean(trace, k))
