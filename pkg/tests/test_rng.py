import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from covoter.rng import VDEC, VPICK, RngStream, key_uniform, key_uniform_array

u64 = st.integers(0, 2**64 - 1)


@given(u64, st.integers(1, 11), st.integers(0, 2**40), st.integers(0, 2**40))
def test_uniform_is_pure_and_in_open_interval(seed, kind, ent, ctr):
    a = key_uniform(np.uint64(seed), kind, ent, ctr)
    assert a == key_uniform(np.uint64(seed), kind, ent, ctr)
    assert 0.0 < a < 1.0


def test_streams_are_distinct():
    r = RngStream(7)
    assert r.uniform(VPICK, 0, 3) != r.uniform(VDEC, 0, 3)
    assert RngStream(7).uniform(VPICK, 0, 3) != RngStream(8).uniform(VPICK, 0, 3)


def test_array_matches_scalar():
    r = RngStream(11)
    ents = np.arange(50)
    np.testing.assert_array_equal(r.uniforms(VPICK, ents, 2), [r.uniform(VPICK, int(e), 2) for e in ents])
    np.testing.assert_array_equal(key_uniform_array(np.uint64(11), VPICK, ents, 2), r.uniforms(VPICK, ents, 2))


def test_uniform_distribution_ks():
    r = RngStream(2024)
    sample = np.array([r.uniform(VDEC, 0, k) for k in range(20000)])
    assert stats.kstest(sample, "uniform").pvalue > 1e-3


def test_generator_is_reproducible():
    a = RngStream(5).generator(3).random(4)
    b = RngStream(5).generator(3).random(4)
    np.testing.assert_array_equal(a, b)
