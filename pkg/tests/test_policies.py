import math
import random
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from learncache.engine import CHAIN_SECOND, NON_INITIAL, OTHER, CacheSim, MarkingInvariantError
from learncache.errors import MissingPredictionsError, ParameterError
from learncache.opt import belady_cost
from learncache.policies import (Kind, LMarkerRule, LNonMarkerRule, PolicySpec,
                                 PredictiveMarkerRule, RandomMarkerRule, default_tau, harmonic, make_rule,
                                 simulate, verify_lemma_injection, verify_lemma_totalerror)
from learncache.trace import NoiseModel, Trace, l1_error, noisy_predictions
from learncache.workloads import uniform_random, zipf

from conftest import A, B, C, D

X, Y = 5, 9
ALL_KINDS = ["LRU", "RANDOM_MARKER", "BLIND_FOLLOW", "PREDICTIVE_MARKER", "LMARKER", "LNONMARKER",
             "COMBINER(LNONMARKER;RANDOM_MARKER)"]
MARKERS = ["LRU", "RANDOM_MARKER", "PREDICTIVE_MARKER", "LMARKER", "PREDICTIVE_MARKER(tau=2)"]

requests_st = st.lists(st.integers(0, 9), min_size=1, max_size=80)


def staged(rule, unmarked, marked=(), preds=None, seed=0):
    """A CacheSim frozen mid-phase with the given marked/unmarked residents."""
    sim = CacheSim(Trace([X], [1]), 2, rule, random.Random(seed))
    sim.cache = set(unmarked) | set(marked)
    sim.unmarked = sorted(unmarked)
    sim.seen = set(marked)
    sim.last_pred = dict(preds or {p: 1 for p in sim.cache})
    return sim


def noisy_trace(requests, seed, sigma=3.0):
    return Trace(requests, noisy_predictions(requests, NoiseModel("scaled", sigma), seed))


# -- simulate examples ---------------------------------------------------------------


def test_blind_follow_perfect_is_belady():
    trace = Trace.perfect([A, B, C, A, B])
    assert simulate(PolicySpec(Kind.BLIND_FOLLOW), trace, 2).misses == 4 == belady_cost(trace, 2)


def test_lru_fits():
    assert simulate(PolicySpec(Kind.LRU), Trace([A, B, A, B]), 2).misses == 2


def test_random_marker_small_example_outcomes():
    trace = Trace([A, B, C, A, B])
    outcomes = Counter(simulate(PolicySpec(Kind.RANDOM_MARKER, seed=s), trace, 2).misses
                       for s in range(200))
    assert set(outcomes) == {4, 5}


@given(requests_st, st.integers(1, 5))
def test_blind_follow_perfect_matches_belady(requests, k):
    trace = Trace.perfect(requests)
    assert simulate(PolicySpec(Kind.BLIND_FOLLOW), trace, k).misses == belady_cost(trace, k)


# -- eviction rules ------------------------------------------------------------------


def test_lmarker_rule():
    rule = LMarkerRule()
    assert rule.victim(staged(rule, [X, Y], preds={X: 10, Y: 99}), A, OTHER, 0, True) == Y
    assert rule.victim(staged(rule, [X, Y], preds={X: 5, Y: 5}), A, OTHER, 0, True) == X
    assert rule.victim(staged(rule, [X], marked=[Y]), A, OTHER, 1, False) == X


def test_lnonmarker_rule():
    rule = LNonMarkerRule()
    assert rule.victim(staged(rule, [Y], marked=[X]), A, NON_INITIAL, 0, True) == Y
    assert rule.victim(staged(rule, [X], marked=[Y]), A, OTHER, 1, False) == X
    picks = Counter(rule.victim(staged(rule, [Y], marked=[X], seed=s), A, CHAIN_SECOND, 1, False)
                    for s in range(4000))
    assert set(picks) == {X, Y}
    # two-sided binomial check at roughly 4.5 sigma
    assert abs(picks[X] - 2000) < 150


def test_predictive_marker_rule():
    rule = PredictiveMarkerRule(2)
    assert rule.victim(staged(rule, [X, Y], preds={X: 3, Y: 8}), A, OTHER, 0, True) == Y
    assert rule.victim(staged(rule, [X], marked=[Y]), A, OTHER, 2, False) == X


def test_random_marker_requires_unmarked():
    rule = RandomMarkerRule()
    with pytest.raises(MarkingInvariantError):
        rule.victim(staged(rule, [], marked=[X, Y]), A, OTHER, 0, True)


# -- invariants ----------------------------------------------------------------------


@pytest.mark.parametrize("name", MARKERS)
@given(requests=requests_st, k=st.integers(1, 5), seed=st.integers(0, 1000))
@settings(max_examples=40)
def test_marker_policies_follow_marking(name, requests, k, seed):
    trace = noisy_trace(requests, seed)
    report = simulate(PolicySpec.parse(name, seed), trace, k)
    assert report.marked_evictions == 0
    assert report.chain_count_C == report.clean_count_L
    assert sum(c.length for c in report.chains) == report.misses
    # at most k distinct arrivals per phase, hence at most k misses in any phase
    # for a policy that never evicts a marked page
    assert all(m <= k for m in report.per_phase_misses)


@pytest.mark.parametrize("name", ALL_KINDS)
@given(requests=requests_st, k=st.integers(1, 5), seed=st.integers(0, 1000))
@settings(max_examples=30)
def test_every_policy_is_sane(name, requests, k, seed):
    trace = noisy_trace(requests, seed)
    spec = PolicySpec.parse(name, seed)
    report = simulate(spec, trace, k)
    assert belady_cost(trace, k) <= report.misses <= len(requests)
    assert report.misses >= len(set(requests))
    assert sum(report.per_phase_misses) == report.misses
    assert report == simulate(spec, trace, k)


def test_cache_never_exceeds_k():
    requests = uniform_random(12, 400, 3)
    trace = noisy_trace(requests, 1)
    for name in ALL_KINDS[:-1]:
        spec = PolicySpec.parse(name, 7)
        sim = CacheSim(trace, 4, make_rule(spec, 4), random.Random(7))
        while sim.time < len(trace):
            sim.step()
            assert len(sim.cache) <= 4
            assert set(sim.unmarked) == sim.cache - sim.seen
        assert sim.report() == simulate(spec, trace, 4)


def test_missing_predictions():
    with pytest.raises(MissingPredictionsError):
        simulate(PolicySpec(Kind.LMARKER), Trace([A, B, C]), 2)
    assert simulate(PolicySpec(Kind.LRU), Trace([A, B, C]), 2).misses == 3


def test_bad_parameters():
    with pytest.raises(ParameterError):
        simulate(PolicySpec(Kind.LRU), Trace([A]), 0)
    with pytest.raises(ParameterError):
        PolicySpec(Kind.PREDICTIVE_MARKER, tau=0)
    with pytest.raises(ParameterError):
        PolicySpec.parse("COMBINER(LRU;LRU;gamma=1)")
    with pytest.raises(ParameterError):
        PolicySpec.parse("FIFO")
    with pytest.raises(ParameterError):
        PolicySpec.parse("LRU(tau=2)")


def test_policy_parse():
    spec = PolicySpec.parse("PREDICTIVE_MARKER(tau=3)", seed=4)
    assert spec.kind is Kind.PREDICTIVE_MARKER and spec.tau == 3 and spec.seed == 4
    comb = PolicySpec.parse("COMBINER(LNONMARKER;RANDOM_MARKER;gamma=3/2)")
    assert comb.a.kind is Kind.LNONMARKER and comb.b.kind is Kind.RANDOM_MARKER
    assert comb.gamma == Fraction(3, 2)
    assert PolicySpec.parse(comb.label) == comb


def test_default_tau():
    assert harmonic(4) == Fraction(25, 12)
    assert default_tau(1) == 1 and default_tau(4) == 3 and default_tau(32) == 5


@given(requests_st, st.integers(1, 5), st.integers(0, 500))
@settings(max_examples=60)
def test_predictive_marker_tau_one_is_lmarker(requests, k, seed):
    trace = noisy_trace(requests, seed)
    assert simulate(PolicySpec(Kind.PREDICTIVE_MARKER, seed, tau=1), trace, k) == \
        simulate(PolicySpec(Kind.LMARKER, seed), trace, k)


def test_random_marker_statistical_bound():
    k = 8
    trace = Trace(zipf(24, 2000, 0.8, 5))
    opt = belady_cost(trace, k)
    misses = [simulate(PolicySpec(Kind.RANDOM_MARKER, seed=s), trace, k).misses
              for s in range(1000)]
    mean = sum(misses) / len(misses)
    assert opt <= mean <= (2 * float(harmonic(k)) + 0.05) * opt + k


def test_chains_record_n_star():
    found = False
    for seed in range(30):
        trace = noisy_trace(uniform_random(10, 300, seed), seed, sigma=20.0)
        report = simulate(PolicySpec(Kind.LNONMARKER, seed), trace, 4)
        if report.sum_n_star > 0:
            found = True
            assert any(c.length > 1 for c in report.chains)
    assert found


# -- combiner ------------------------------------------------------------------------


@given(requests_st, st.integers(1, 5), st.integers(0, 500))
@settings(max_examples=40)
def test_combiner_with_identical_deterministic_inners(requests, k, seed):
    trace = noisy_trace(requests, seed)
    for name in ("LRU", "BLIND_FOLLOW"):
        report = simulate(PolicySpec.parse(f"COMBINER({name};{name})", seed), trace, k)
        alone = simulate(PolicySpec.parse(name), trace, k)
        assert report.switch_times == ()
        assert report.misses == alone.misses == report.shadow_misses[0]


@given(requests_st, st.integers(1, 5), st.integers(0, 500))
@settings(max_examples=60)
def test_combiner_tracks_followed_shadow_until_switch(requests, k, seed):
    trace = noisy_trace(requests, seed)
    report = simulate(PolicySpec.parse("COMBINER(LNONMARKER;RANDOM_MARKER)", seed), trace, k)
    if not report.switch_times:
        assert report.misses == report.shadow_misses[0]


@given(requests_st, st.integers(1, 5), st.integers(0, 500),
       st.sampled_from([Fraction(3, 2), Fraction(2), Fraction(3)]))
@settings(max_examples=60)
def test_combiner_switch_count(requests, k, seed, gamma):
    trace = noisy_trace(requests, seed, sigma=10.0)
    spec = PolicySpec(Kind.COMBINER, seed, a=PolicySpec(Kind.LNONMARKER),
                      b=PolicySpec(Kind.RANDOM_MARKER), gamma=gamma)
    report = simulate(spec, trace, k)
    # each switch needs the followed count to exceed gamma times the other, so
    # the smaller count grows geometrically between consecutive switches
    bound = 2 * (math.log(max(report.shadow_misses), float(gamma)) + 2)
    assert len(report.switch_times) <= bound


def test_combiner_perfect_predictions_follows_lnonmarker():
    for seed in range(20):
        trace = Trace.perfect(zipf(40, 1500, 0.7, seed))
        report = simulate(PolicySpec.parse("COMBINER(LNONMARKER;RANDOM_MARKER)", seed), trace, 8)
        alone = simulate(PolicySpec(Kind.LNONMARKER, seed), trace, 8)
        assert report.switch_times == ()
        assert report.misses <= alone.misses


# -- lemma checks --------------------------------------------------------------------


@given(requests_st, st.integers(1, 5), st.integers(0, 500))
@settings(max_examples=100)
def test_lemma_checks_hold_with_noise(requests, k, seed):
    trace = noisy_trace(requests, seed, sigma=float(seed % 30))
    error = l1_error(trace, trace.phases(k))
    for name in ("LNONMARKER", "LMARKER", "RANDOM_MARKER"):
        report = simulate(PolicySpec.parse(name, seed), trace, k)
        assert verify_lemma_totalerror(report, error, k)
        assert verify_lemma_injection(report, error, k)


@given(requests_st, st.integers(1, 5), st.integers(0, 500))
def test_lemma_checks_with_perfect_predictions(requests, k, seed):
    trace = Trace.perfect(requests)
    report = simulate(PolicySpec(Kind.LNONMARKER, seed), trace, k)
    assert report.sum_n_star <= 6 * k * k
    assert report.chain_count_C <= report.clean_count_L + 4 * k


def test_lemma_checks_single_phase():
    trace = Trace([A, B, C, D], [2, 2, 2, 2])
    error = l1_error(trace, trace.phases(4))
    report = simulate(PolicySpec(Kind.LNONMARKER), trace, 4)
    assert report.sum_n_star <= 3 * error.eta + 6 * 16
    assert verify_lemma_totalerror(report, error, 4)
