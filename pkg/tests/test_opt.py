import pytest
from hypothesis import given
from hypothesis import strategies as st

from learncache.errors import InstanceTooLargeError, ParameterError
from learncache.opt import belady_cost, brute_force_opt, count_clean, opt_report
from learncache.trace import Trace

from conftest import A, B, C, D

small_requests = st.lists(st.integers(0, 5), min_size=1, max_size=14)


@pytest.mark.parametrize("requests, k, expected", [
    ([A, B, C, A, B], 2, 4),
    ([A, A, A, A], 1, 1),
    ([A, B, A, B, C, A, B], 2, 4),
])
def test_belady_examples(requests, k, expected):
    assert belady_cost(Trace(requests), k) == expected


@pytest.mark.parametrize("requests, k, expected", [
    ([A, B, C, A, B], 2, 4),
    ([A, B], 2, 2),
    ([A, B, C], 3, 3),
])
def test_brute_force_examples(requests, k, expected):
    assert brute_force_opt(Trace(requests), k) == expected


def test_brute_force_guard():
    with pytest.raises(InstanceTooLargeError):
        brute_force_opt(Trace([A] * 15), 1)
    with pytest.raises(InstanceTooLargeError):
        brute_force_opt(Trace(list(range(7))), 2)
    with pytest.raises(InstanceTooLargeError):
        brute_force_opt(Trace([A, B]), 5)


def test_bad_k():
    with pytest.raises(ParameterError):
        belady_cost(Trace([A]), 0)


@pytest.mark.parametrize("requests, k, expected", [
    ([A, B, C, A, B], 2, 4),
    ([A, A, A], 2, 1),
    ([A, B, A, B, C, D], 2, 4),
])
def test_count_clean_examples(requests, k, expected):
    assert count_clean(Trace(requests), k) == expected


@given(small_requests, st.integers(1, 4))
def test_belady_matches_brute_force(requests, k):
    assert belady_cost(Trace(requests), k) == brute_force_opt(Trace(requests), k)


@given(st.lists(st.integers(0, 12), min_size=1, max_size=120), st.integers(1, 6))
def test_clean_count_brackets_opt(requests, k):
    report = opt_report(Trace(requests), k)
    assert report.clean_count <= 2 * report.opt_cost
    assert report.opt_cost <= report.clean_count


@given(st.lists(st.integers(0, 12), min_size=1, max_size=120), st.integers(1, 6))
def test_opt_monotone_in_k(requests, k):
    trace = Trace(requests)
    assert belady_cost(trace, k + 1) <= belady_cost(trace, k)
    assert belady_cost(trace, k) >= len(set(requests))


@given(st.integers(1, 40), st.integers(1, 8))
def test_all_distinct_misses_every_request(n, k):
    trace = Trace(list(range(n)))
    assert belady_cost(trace, k) == n
    assert count_clean(trace, k) == n
