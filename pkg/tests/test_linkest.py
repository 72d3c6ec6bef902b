import random

import pytest
from hypothesis import given, strategies as st

from harvestsim.linkest import (ALPHA, CARRIER_MIN, D1_MIN, WINDOW, LinkEstimate, NeighborTable,
                                expected_from_seq, is_carrier_detectable, is_d1_neighbor, observe,
                                wmewma_update)


def test_first_window_primes_average():
    est = LinkEstimate()
    for _ in range(WINDOW - 1):
        est = observe(est, 1)
    assert est.value is None
    est = observe(est, 1, 0)
    assert est.value == round(100 * (WINDOW - 1) / WINDOW)
    assert est.window_expected == 0


def test_ewma_step():
    est = LinkEstimate(value=50, window_received=30, window_expected=30)
    est = wmewma_update(est)
    assert est.value == round(ALPHA * 50 + (1 - ALPHA) * 100)


def test_empty_window_is_noop():
    est = LinkEstimate(value=40)
    assert wmewma_update(est) == est


def test_bad_alpha_rejected():
    with pytest.raises(ValueError):
        LinkEstimate(alpha=1.0)
    with pytest.raises(ValueError):
        LinkEstimate(value=101)


def test_thresholds():
    assert is_d1_neighbor(D1_MIN) and not is_d1_neighbor(D1_MIN - 1)
    assert is_d1_neighbor(LinkEstimate(value=80)) and not is_d1_neighbor(LinkEstimate())
    assert not is_d1_neighbor(None)
    assert is_carrier_detectable(CARRIER_MIN) and not is_carrier_detectable(CARRIER_MIN - 1)


def test_expected_from_seq_wraps():
    assert expected_from_seq(10, 11) == 1
    assert expected_from_seq(10, 14) == 4
    assert expected_from_seq(0xFFFF, 2) == 3
    with pytest.raises(ValueError):
        expected_from_seq(5, 5)


@pytest.mark.parametrize("p", [0.3, 0.5, 0.75, 0.9, 1.0])
def test_settles_and_stays(p):
    rng = random.Random(int(p * 100))
    est = LinkEstimate()
    settled = None
    for w in range(200):
        for _ in range(WINDOW):
            est = observe(est, 1, int(rng.random() < p))
        if est.value is not None and abs(est.value - 100 * p) <= 10:
            settled = w
            break
    assert settled is not None and settled < 20
    misses = 0
    for _ in range(50):
        for _ in range(WINDOW):
            est = observe(est, 1, int(rng.random() < p))
        misses += abs(est.value - 100 * p) > 10
    # the EWMA of a binomial window has sd around 4 points at p=0.5
    assert misses <= 1


@given(st.lists(st.tuples(st.integers(1, 5), st.booleans()), max_size=300))
def test_estimate_stays_in_range(obs):
    est = LinkEstimate()
    for expected, got in obs:
        est = observe(est, expected, int(got))
        assert est.value is None or 0 <= est.value <= 100


def test_table_counts_gaps_as_losses():
    t = NeighborTable()
    seq = 0
    for _ in range(3 * WINDOW):
        t.heard(7, seq, now=seq, hops=2)
        seq += 2  # every other packet lost
    e = t[7]
    # the first packet has no baseline and counts as one received of one
    assert abs(e.est.value - 50) <= 2 and e.hops == 2 and e.last_heard == seq - 2


def test_table_restart_and_resync():
    t = NeighborTable()
    t.heard(3, 100, 0)
    t.heard(3, 5, 1, restart=True)  # counter reset counts as one packet
    assert t[3].est.window_expected == 2
    t.resync()
    assert t[3].last_seq is None
    t.heard(3, 900, 2)
    assert t[3].est.window_expected == 3


def test_table_rejects_negative_hops():
    with pytest.raises(ValueError):
        NeighborTable().heard(1, 0, 0, hops=-1)


def test_set_quality():
    t = NeighborTable()
    t.set_quality(4, 90, hops=1)
    assert 4 in t and is_d1_neighbor(t[4].est) and t[4].hops == 1


@pytest.mark.parametrize("value,want", [(100, 100), (0, 40), (40, 64)])
def test_full_window_examples(value, want):
    est = LinkEstimate(value=value, window_received=30, window_expected=30)
    assert wmewma_update(est).value == want


@given(st.integers(0, 100), st.integers(1, 60))
def test_monotone_response(value, expected):
    full = wmewma_update(LinkEstimate(value=value, window_received=expected, window_expected=expected))
    empty = wmewma_update(LinkEstimate(value=value, window_received=0, window_expected=expected))
    assert full.value >= value >= empty.value
