import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from covoter.core import Model2Params, Opinion
from covoter.errors import ContractViolation
from covoter.simulator import Snapshot, init
from covoter.stats import (
    beta_bin_masses,
    beta_l1,
    consensus_time,
    histogram_of,
    plus_fraction,
    polarisation,
    type_histogram,
)


def _snap(op, adj, t=1.0):
    n = len(op)
    return Snapshot(t, np.array(op, dtype=np.int8), np.full(n, 0.5), np.zeros(n), np.array(adj, dtype=np.uint8))


def test_histogram_counts_and_right_edge():
    h = histogram_of([0.0, 0.24, 0.25, 0.99, 1.0], 4)
    np.testing.assert_array_equal(h.counts, [2, 1, 0, 2])
    assert h.masses.sum() == pytest.approx(1.0)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=200), st.integers(1, 50))
def test_histogram_masses_sum_to_one(vals, bins):
    assert histogram_of(vals, bins).masses.sum() == pytest.approx(1.0)


def test_initial_y_histogram_is_uniform():
    s = init(6000, Model2Params(1.0, 0.5, 0.5), rng=0).snapshot()
    h = type_histogram(s, 20)
    chi2 = ((h.counts - 300) ** 2 / 300).sum()
    assert sps.chi2.sf(chi2, 19) > 1e-3


def test_type_histogram_rejects_unknown_observable():
    s = init(10, Model2Params(1.0, 0.5, 0.5), rng=0).snapshot()
    with pytest.raises(ContractViolation):
        type_histogram(s, 5, "z")


def test_beta_masses_uniform_case_exact():
    edges = np.linspace(0, 1, 11)
    np.testing.assert_allclose(beta_bin_masses(edges, 1.0, 1.0), 0.1, atol=1e-15)
    assert beta_l1(histogram_of((np.arange(1000) + 0.5) / 1000, 10), 1.0, 1.0) == pytest.approx(0.0, abs=1e-12)


def test_beta_l1_of_a_beta_sample_is_small():
    x = np.random.default_rng(1).beta(2.0, 3.0, 10**5)
    assert beta_l1(histogram_of(x, 40), 2.0, 3.0) < 0.05


def test_consensus_time():
    rows = [(0.0, 5, 10), (1.0, 9, 10), (2.0, 10, 10)]
    assert consensus_time(rows) == 2.0
    assert consensus_time(rows, eps=0.1) == 1.0
    assert consensus_time(rows[:2]) is None


def test_polarisation_examples():
    n = 6
    full = np.ones((n, n)) - np.eye(n)
    assert polarisation(_snap([0] * n, full)) == (0.0, 0.0)
    split = polarisation(_snap([0, 0, 0, 1, 1, 1], full))
    assert split[0] == pytest.approx(9 / 15)
    assert split[1] == pytest.approx(9 / 15)


@given(st.lists(st.booleans(), min_size=2, max_size=20), st.integers(0, 2**32 - 1))
def test_polarisation_in_range(ops, seed):
    n = len(ops)
    a = np.triu(np.random.default_rng(seed).random((n, n)) < 0.4, 1)
    a = a | a.T
    d, s = polarisation(_snap([Opinion.PLUS if o else Opinion.MINUS for o in ops], a))
    assert 0 <= d <= 1 and 0 <= s <= 1
    assert d <= s + 1e-15 or a.sum() == 0


def test_plus_fraction():
    assert plus_fraction(_snap([0, 1, 1, 1], np.zeros((4, 4)))) == pytest.approx(0.25)
    assert math.isclose(plus_fraction(_snap([0, 0], np.zeros((2, 2)))), 1.0)
