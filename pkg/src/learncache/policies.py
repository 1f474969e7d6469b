"""Eviction policies, the policy spec, and simulation entry points."""

from __future__ import annotations

import hashlib
import math
import random
import re
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction

from .engine import CHAIN_SECOND, NON_INITIAL, CacheSim, SimReport
from .errors import ParameterError
from .trace import ErrorReport, Trace


def harmonic(k: int) -> Fraction:
    return sum((Fraction(1, i) for i in range(1, k + 1)), Fraction(0))


def default_tau(k: int) -> int:
    return math.ceil(harmonic(k))


def derive_seed(seed: int, tag: str) -> int:
    """Child seed for a named sub-stream; stable across platforms and runs."""
    digest = hashlib.blake2b(f"{seed}:{tag}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


class Kind(str, Enum):
    LRU = "LRU"
    RANDOM_MARKER = "RANDOM_MARKER"
    BLIND_FOLLOW = "BLIND_FOLLOW"
    PREDICTIVE_MARKER = "PREDICTIVE_MARKER"
    LMARKER = "LMARKER"
    LNONMARKER = "LNONMARKER"
    COMBINER = "COMBINER"


MARKER_KINDS = frozenset({Kind.LRU, Kind.RANDOM_MARKER, Kind.PREDICTIVE_MARKER, Kind.LMARKER})


@dataclass(frozen=True)
class PolicySpec:
    """Which policy to run, its parameters and its RNG seed.

    ``tau`` is the trust threshold of PREDICTIVE_MARKER (``None`` means
    ``ceil(H(k))``); ``a``, ``b`` and ``gamma`` configure COMBINER.
    """

    kind: Kind
    seed: int = 0
    tau: int | None = None
    a: PolicySpec | None = None
    b: PolicySpec | None = None
    gamma: Fraction = Fraction(2)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "gamma", Fraction(self.gamma))
        if self.tau is not None and self.tau < 1:
            raise ParameterError(f"tau must be >= 1, got {self.tau}")
        if self.kind is Kind.COMBINER:
            if self.a is None or self.b is None:
                raise ParameterError("COMBINER needs two inner policies")
            if Kind.COMBINER in (self.a.kind, self.b.kind):
                raise ParameterError("COMBINER inner policies cannot be combiners")
            if self.gamma <= 1:
                raise ParameterError(f"gamma must exceed 1, got {self.gamma}")

    @property
    def label(self) -> str:
        if self.kind is Kind.PREDICTIVE_MARKER and self.tau is not None:
            return f"PREDICTIVE_MARKER(tau={self.tau})"
        if self.kind is Kind.COMBINER:
            g = self.gamma
            gtxt = str(g.numerator) if g.denominator == 1 else f"{g.numerator}/{g.denominator}"
            return f"COMBINER({self.a.label};{self.b.label};gamma={gtxt})"
        return self.kind.value

    def with_seed(self, seed: int) -> PolicySpec:
        return replace(self, seed=seed)

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> PolicySpec:
        """Parse labels such as ``LMARKER``, ``PREDICTIVE_MARKER(tau=3)``,
        ``COMBINER(LNONMARKER;RANDOM_MARKER;gamma=3/2)``."""
        text = text.strip()
        m = re.fullmatch(r"(\w+)\s*(?:\((.*)\))?", text)
        if not m:
            raise ParameterError(f"cannot parse policy {text!r}")
        name, args = m.group(1).upper(), m.group(2)
        try:
            kind = Kind(name)
        except ValueError:
            raise ParameterError(f"unknown policy {name!r}") from None
        if kind is Kind.COMBINER:
            parts = [p.strip() for p in (args or "").replace(",", ";").split(";") if p.strip()]
            inner = [p for p in parts if not p.lower().startswith("gamma")]
            opts = [p for p in parts if p.lower().startswith("gamma")]
            if len(inner) != 2 or len(opts) > 1:
                raise ParameterError(f"COMBINER needs two policies and optional gamma: {text!r}")
            gamma = Fraction(opts[0].split("=", 1)[1].strip()) if opts else Fraction(2)
            return cls(kind, seed, a=cls.parse(inner[0]), b=cls.parse(inner[1]), gamma=gamma)
        tau = None
        if args:
            if kind is not Kind.PREDICTIVE_MARKER:
                raise ParameterError(f"{name} takes no parameters")
            key, _, value = args.partition("=")
            if key.strip().lower() != "tau" or not value.strip().isdigit():
                raise ParameterError(f"expected tau=<int>, got {args!r}")
            tau = int(value)
        return cls(kind, seed, tau=tau)


# -- eviction rules ------------------------------------------------------------------


class LRURule:
    name = "LRU"
    needs_predictions = False

    def victim(self, sim, page, cls, chain_len, is_clean):
        return sim.least_recent()


class RandomMarkerRule:
    name = "RANDOM_MARKER"
    needs_predictions = False

    def victim(self, sim, page, cls, chain_len, is_clean):
        return sim.random_unmarked()


class BlindFollowRule:
    """Evict the cached page predicted to return last; ignores marks."""

    name = "BLIND_FOLLOW"
    needs_predictions = True

    def victim(self, sim, page, cls, chain_len, is_clean):
        return sim.max_pred_cached()


class PredictiveMarkerRule:
    """Trust predictions for the first ``tau`` evictions of a chain, then go random."""

    name = "PREDICTIVE_MARKER"
    needs_predictions = True

    def __init__(self, tau: int):
        self.tau = tau

    def victim(self, sim, page, cls, chain_len, is_clean):
        if chain_len < self.tau:
            return sim.max_pred_unmarked()
        return sim.random_unmarked()


class LMarkerRule:
    name = "LMARKER"
    needs_predictions = True

    def victim(self, sim, page, cls, chain_len, is_clean):
        if is_clean:
            return sim.max_pred_unmarked()
        return sim.random_unmarked()


class LNonMarkerRule:
    name = "LNONMARKER"
    needs_predictions = True

    def victim(self, sim, page, cls, chain_len, is_clean):
        if cls == NON_INITIAL:
            return sim.max_pred_unmarked()
        if cls == CHAIN_SECOND:
            return sim.random_cached()
        return sim.random_unmarked()


def make_rule(spec: PolicySpec, k: int):
    if spec.kind is Kind.LRU:
        return LRURule()
    if spec.kind is Kind.RANDOM_MARKER:
        return RandomMarkerRule()
    if spec.kind is Kind.BLIND_FOLLOW:
        return BlindFollowRule()
    if spec.kind is Kind.PREDICTIVE_MARKER:
        return PredictiveMarkerRule(spec.tau if spec.tau is not None else default_tau(k))
    if spec.kind is Kind.LMARKER:
        return LMarkerRule()
    if spec.kind is Kind.LNONMARKER:
        return LNonMarkerRule()
    raise ParameterError(f"{spec.kind} has no single eviction rule")


# -- simulation ----------------------------------------------------------------------


def simulate(policy: PolicySpec, trace: Trace, k: int) -> SimReport:
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if policy.kind is Kind.COMBINER:
        return simulate_combiner(policy.a, policy.b, policy.gamma, trace, k, seed=policy.seed)
    return CacheSim(trace, k, make_rule(policy, k), random.Random(policy.seed)).run()


class _FollowRule:
    """Physical-cache rule of the combiner: copy the followed shadow's victim when
    it is physically cached, else apply the followed policy's own rule here."""

    name = "COMBINER"

    def __init__(self, shadows, rules):
        self.shadows = shadows
        self.rules = rules
        self.following = 0
        self.needs_predictions = any(r.needs_predictions for r in rules)

    def victim(self, sim, page, cls, chain_len, is_clean):
        shadow_victim = self.shadows[self.following].last_victim
        if shadow_victim is not None and shadow_victim in sim.cache:
            return shadow_victim
        return self.rules[self.following].victim(sim, page, cls, chain_len, is_clean)


def simulate_combiner(a: PolicySpec, b: PolicySpec, gamma, trace: Trace, k: int,
                      seed: int = 0) -> SimReport:
    """Run A and B as shadows and serve a physical cache that follows one of them.

    Starts by following A and switches whenever the followed shadow's misses
    exceed ``gamma`` times the other's. Switching never flushes the physical
    cache; it converges lazily through subsequent evictions.
    """
    gamma = Fraction(gamma)
    if gamma <= 1:
        raise ParameterError(f"gamma must exceed 1, got {gamma}")
    rules = (make_rule(a, k), make_rule(b, k))
    shadows = (
        CacheSim(trace, k, rules[0], random.Random(derive_seed(seed, "A"))),
        CacheSim(trace, k, rules[1], random.Random(derive_seed(seed, "B"))),
    )
    follow = _FollowRule(shadows, rules)
    physical = CacheSim(trace, k, follow, random.Random(derive_seed(seed, "P")))
    num, den = gamma.numerator, gamma.denominator
    switch_times = []
    for pos in range(len(trace)):
        shadows[0].step()
        shadows[1].step()
        physical.step()
        cur = shadows[follow.following].misses
        other = shadows[1 - follow.following].misses
        if cur * den > num * other:
            follow.following = 1 - follow.following
            switch_times.append(pos + 1)
    return physical.report(switch_times=tuple(switch_times),
                           shadow_misses=(shadows[0].misses, shadows[1].misses))


# -- deterministic lemma checks ------------------------------------------------------

TOTALERROR_SLACK = 6  # times k**2
INJECTION_SLACK = 2  # times k**2


def verify_lemma_totalerror(report: SimReport, error: ErrorReport, k: int) -> bool:
    """Sum of N*(c) over chains is at most 3*eta, up to an O(k^2) end-of-trace slack."""
    return report.sum_n_star <= 3 * error.eta + TOTALERROR_SLACK * k * k


def verify_lemma_injection(report: SimReport, error: ErrorReport, k: int) -> bool:
    """Extra chains beyond the clean count are paid for by error: eta >= k(C - L)/2."""
    return 2 * (error.eta + INJECTION_SLACK * k * k) >= k * (report.chain_count_C
                                                            - report.clean_count_L)
