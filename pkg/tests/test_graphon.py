import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covoter.core import DensityField, Model2Params, Model3Params, Opinion, alpha, kernel_H, quantile
from covoter.errors import BudgetError, ContractViolation
from covoter.experiments import cut_norm_brute_force, random_signed_blocks
from covoter.graphon import (
    EXACT_BUDGET,
    StepGraphon,
    block_average,
    cut_distance,
    cut_norm,
    cut_norm_exact,
    cut_norm_lower_bound,
    from_adjacency,
    from_snapshot,
    l1_distance,
    reference,
)
from covoter.simulator import Snapshot

P2 = Model2Params(0.66, 0.9, 0.1, 0.05)


def _graphon(draw_k, gen):
    b = np.concatenate(([0.0], np.sort(gen.uniform(0.05, 0.95, draw_k - 1)), [1.0]))
    b = np.unique(b)
    k = b.size - 1
    v = gen.random((k, k))
    return StepGraphon(b, 0.5 * (v + v.T))


graphons = st.tuples(st.integers(1, 6), st.integers(0, 2**32 - 1)).map(
    lambda a: _graphon(a[0], np.random.default_rng(a[1]))
)


# --- construction -----------------------------------------------------------


def test_from_snapshot_small_example():
    op = np.array([Opinion.PLUS, Opinion.PLUS, Opinion.MINUS], dtype=np.int8)
    adj = np.zeros((3, 3), dtype=np.uint8)
    adj[0, 1] = adj[1, 0] = 1
    y = np.array([0.2, 0.6, 0.5])
    g = from_snapshot(Snapshot(math.inf, op, y, np.zeros(3), adj))
    expect = np.zeros((3, 3))
    expect[0, 1] = expect[1, 0] = 1
    np.testing.assert_array_equal(g.values, expect)
    assert g(0.1, 0.5) == 1.0 and g(0.1, 0.9) == 0.0


def test_empty_and_complete_graphs():
    n = 7
    assert from_adjacency(np.zeros((n, n))).integral() == 0.0
    full = np.ones((n, n)) - np.eye(n)
    assert from_adjacency(full).integral() == pytest.approx(1 - 1 / n)


def test_step_graphon_validates():
    with pytest.raises(ContractViolation):
        StepGraphon(np.array([0.0, 0.5, 1.0]), np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ContractViolation):
        StepGraphon(np.array([0.0, 1.0]), np.array([[1.5]]))


def test_block_average():
    g = StepGraphon.uniform_blocks(np.eye(4))
    assert block_average(g, 2).values[0, 0] == pytest.approx(0.5)


# --- reference graphon ------------------------------------------------------


def test_reference_constant_kernel():
    par = Model2Params(0.66, 0.3, 0.3, 0.3)
    g = reference(2.0, DensityField.uniform(64, 0.5), par, 10)
    np.testing.assert_allclose(g.values, 0.3, atol=1e-12)


def test_reference_pure_plus_uniform_in_long_time_limit():
    g = reference(math.inf, DensityField.uniform(256, 1.0), P2, 16)
    c = (np.arange(16) + 0.5) / 16
    np.testing.assert_allclose(g.values, kernel_H(math.inf, c[:, None], c[None, :], P2), atol=1e-12)


def test_reference_pure_plus_uniform_on_attainable_range():
    t, M, k = math.log(2), 400, 16
    top = 1 - math.exp(-t)
    f = np.where(np.linspace(0, 1, M + 1) <= top + 1e-12, 1 / top, 0.0)
    dens = DensityField(t, f, np.zeros(M + 1), mass_tol=0.01)
    g = reference(t, dens, P2, k)
    c = (np.arange(k) + 0.5) / k
    want = kernel_H(t, top * c[:, None], top * c[None, :], P2)
    np.testing.assert_allclose(g.values, want, atol=2.0 / M)


def test_reference_monotone_when_plus_prefers():
    g = reference(3.0, DensityField.uniform(128, 0.5), P2, 12)
    v = g.values
    # plus block first, sorted by increasing type: kernel rises within it
    assert np.all(np.diff(v[:6, :6], axis=0) >= -1e-12)


def test_reference_model3_in_unit_interval():
    p = Model3Params(0.5, 2, 0.7, 0.3, 0.3, 0.7)
    g = reference(2.0, DensityField.uniform(64, 0.5), p, 10)
    assert g.values.min() >= 0 and g.values.max() <= 1


@pytest.mark.parametrize("t, j", [(1.0, 300), (3.0, 1100), (3.0, 1700)])
def test_alpha_agrees_with_graphon_column_integral(t, j):
    # alpha(t, u) = int_0^{r+} g(y, x_u) dy / int_0^1 g(y, x_u) dy at a column x_u
    M, k = 512, 2000
    y = np.linspace(0, 1, M + 1)
    dens = DensityField(t, 0.55 * 2 * (1 - y), 0.45 * 2 * y)
    g = reference(t, dens, P2, k)
    c = (np.arange(k) + 0.5) / k
    u = min(max(quantile(dens, c[j]), 0.0), 1 - math.exp(-t))
    col = g.values[:, j]
    r_plus = dens.plus_mass
    via_graphon = col[c <= r_plus].sum() / col.sum()
    assert alpha(t, u, dens, P2) == pytest.approx(via_graphon, abs=2e-3)


# --- distances --------------------------------------------------------------


def test_l1_identical_is_zero():
    g = StepGraphon.uniform_blocks(np.eye(3))
    assert l1_distance(g, g) == 0.0


def test_l1_constants():
    assert l1_distance(StepGraphon.constant(0.2), StepGraphon.constant(0.7)) == pytest.approx(0.5)


def test_l1_against_monte_carlo():
    gen = np.random.default_rng(0)
    a, b = _graphon(4, gen), _graphon(4, gen)
    x, yv = gen.random(10**6), gen.random(10**6)
    d = np.abs(a(x, yv) - b(x, yv))
    assert abs(l1_distance(a, b) - d.mean()) <= 3 * d.std() / 1000


@given(graphons, graphons)
def test_l1_symmetric(a, b):
    assert l1_distance(a, b) == pytest.approx(l1_distance(b, a), abs=1e-14)


@given(graphons, graphons, graphons)
def test_l1_triangle(a, b, c):
    assert l1_distance(a, c) <= l1_distance(a, b) + l1_distance(b, c) + 1e-12


@given(graphons, graphons)
def test_cut_at_most_l1(a, b):
    assert cut_distance(a, b) <= l1_distance(a, b) + 1e-12


def test_cut_norm_of_constant():
    assert cut_norm_exact(StepGraphon.constant(0.4)) == pytest.approx(0.4)
    assert cut_norm_lower_bound(StepGraphon.constant(0.4)) == pytest.approx(0.4)


def test_cut_norm_zero_for_identical():
    g = StepGraphon.uniform_blocks(np.eye(4))
    assert cut_distance(g, g) == 0.0


def test_cut_norm_signed_example():
    # +1 on the diagonal blocks, -1 off: best rectangle is one diagonal block
    v = 2 * np.eye(2) - 1
    assert cut_norm_exact(StepGraphon.uniform_blocks(v, signed=True)) == pytest.approx(0.25)


@pytest.mark.parametrize("seed", range(5))
def test_cut_norm_exact_against_brute_force(seed):
    g = random_signed_blocks(6, np.random.default_rng(seed))
    assert cut_norm_exact(g) == pytest.approx(cut_norm_brute_force(g), abs=1e-12)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_lower_bound_never_exceeds_exact(seed):
    g = random_signed_blocks(7, np.random.default_rng(seed))
    assert cut_norm_lower_bound(g, restarts=4, rng=seed) <= cut_norm_exact(g) + 1e-12


def test_exact_budget_enforced():
    g = StepGraphon.uniform_blocks(np.zeros((EXACT_BUDGET + 1, EXACT_BUDGET + 1)))
    with pytest.raises(BudgetError):
        cut_norm_exact(g)
    assert cut_norm(g) == 0.0
