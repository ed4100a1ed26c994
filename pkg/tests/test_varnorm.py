import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varhilbert import varnorm

finite = st.floats(min_value=-50, max_value=50, allow_nan=False)
seqs = st.lists(finite, min_size=1, max_size=10)
rs = st.sampled_from([2.1, 2.5, 3.0])


def test_constant_sequence_vanishes():
    res = varnorm.variation_norm([3.7, 3.7, 3.7], 2.5)
    assert res.value == 0.0
    assert res.jumps == ()


def test_monotone_sequence_endpoint_only():
    # (sum x_i)^r >= sum x_i^r forces the endpoints for monotone data
    res = varnorm.variation_norm([0.0, 1.0, 3.0, 7.0], 2.0)
    assert res.value == pytest.approx(7.0, abs=1e-14)
    assert res.jumps == (0, 3)


def test_alternating_example_frozen_from_brute_force():
    # brute force over all 2^4 subsequences gives sqrt(3)
    assert varnorm.brute_force_variation([0, 1, 0, 1], 2.0) == pytest.approx(np.sqrt(3.0))
    res = varnorm.variation_norm([0, 1, 0, 1], 2.0)
    assert res.value == pytest.approx(np.sqrt(3.0), abs=1e-14)


def test_brute_force_examples():
    assert varnorm.brute_force_variation([0.0, 1.0], 3.0) == pytest.approx(1.0)
    assert varnorm.brute_force_variation([5.0], 2.0) == 0.0


def test_errors():
    with pytest.raises(ValueError):
        varnorm.variation_norm([], 2.0)
    with pytest.raises(ValueError):
        varnorm.variation_norm([1.0, 2.0], 1.0)
    with pytest.raises(ValueError):
        varnorm.brute_force_variation(list(range(21)), 2.0)


def test_oracle_equivalence_random(rng):
    for _ in range(300):
        n = int(rng.integers(2, 13))
        if rng.random() < 0.5:
            seq = rng.standard_normal(n)
        else:
            seq = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        r = float(rng.choice([2.1, 2.5, 3.0]))
        dp = varnorm.variation_norm(seq, r).value
        bf = varnorm.brute_force_variation(seq, r)
        assert abs(dp - bf) <= 1e-12


@given(seqs, rs)
@settings(deadline=None, max_examples=80)
def test_monotone_in_r(seq, r):
    lo = varnorm.variation_norm(seq, r).value
    hi = varnorm.variation_norm(seq, r + 0.5).value
    assert lo >= hi - 1e-10


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=9), rs)
@settings(deadline=None, max_examples=80)
def test_triangle_inequality(pairs, r):
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    va = varnorm.variation_norm(a, r).value
    vb = varnorm.variation_norm(b, r).value
    vab = varnorm.variation_norm(a + b, r).value
    assert vab <= va + vb + 1e-9


@given(st.lists(finite, min_size=2, max_size=10), rs)
@settings(deadline=None, max_examples=80)
def test_endpoint_law_for_monotone(seq, r):
    arr = np.sort(np.asarray(seq))
    res = varnorm.variation_norm(arr, r)
    assert res.value == pytest.approx(abs(arr[-1] - arr[0]), abs=1e-9)


def test_jump_consistency(rng):
    for _ in range(100):
        seq = rng.standard_normal(int(rng.integers(2, 12)))
        r = 2.5
        res = varnorm.variation_norm(seq, r)
        if res.value == 0.0:
            continue
        idx = np.asarray(res.jumps)
        assert np.all(np.diff(idx) > 0)
        recon = np.sum(np.abs(np.diff(seq[idx])) ** r) ** (1.0 / r)
        assert recon == pytest.approx(res.value, abs=1e-12)


def test_linearize_single_jump():
    co = varnorm.linearize([0.0, 1.0], 2.0)
    assert co.shape == (1,)
    assert co[0] == pytest.approx(1.0)
    assert np.sum(np.abs(co) ** 2.0) == pytest.approx(1.0)


def test_linearize_alternating():
    co = varnorm.linearize([0, 1, 0, 1], 2.0)
    assert co.shape == (3,)
    assert np.allclose(np.abs(co), 1.0 / np.sqrt(3.0))


def test_linearize_zero_variation():
    assert varnorm.linearize([2.0, 2.0], 2.5).size == 0


@given(st.lists(finite, min_size=2, max_size=10), rs)
@settings(deadline=None, max_examples=80)
def test_linearize_duality(seq, r):
    arr = np.asarray(seq, dtype=float)
    res = varnorm.variation_norm(arr, r)
    co = varnorm.linearize(arr, r)
    if res.value == 0.0:
        assert co.size == 0
        return
    rprime = r / (r - 1.0)
    assert abs(np.sum(np.abs(co) ** rprime) - 1.0) <= 1e-10
    idx = np.asarray(res.jumps)
    deltas = arr[idx[1:]] - arr[idx[:-1]]
    assert np.sum(co * deltas).real == pytest.approx(res.value, rel=1e-10)


def test_batch_matches_scalar(rng):
    S = rng.standard_normal((64, 8)) + 1j * rng.standard_normal((64, 8))
    vals, pred, end = varnorm.variation_batch(S, 2.5)
    jumps, counts = varnorm.jump_positions_batch(pred, end)
    for i in range(S.shape[0]):
        res = varnorm.variation_norm(S[i], 2.5)
        assert vals[i] == pytest.approx(res.value, abs=1e-12)
        if res.value > 0:
            assert tuple(jumps[i][: counts[i]]) == res.jumps
