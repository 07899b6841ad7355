import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcidisfluency.nonlinear import (
    coarse_grain, higuchi_fd, multiscale_pe, ordinal_patterns, permutation_entropy,
    shannon_entropy, summarize,
)


def test_shannon_constant_is_zero():
    assert shannon_entropy(np.full(100, 0.3)) == 0.0


def test_shannon_eight_uniform_bins_is_three_bits():
    x = np.repeat(np.arange(8.0), 25)
    assert shannon_entropy(x, n_bins=8) == 3.0


def test_shannon_uniform_noise_64_bins():
    x = np.random.default_rng(0).uniform(-1, 1, 100_000)
    assert shannon_entropy(x, 64) == pytest.approx(6.0, abs=0.05)


def test_shannon_empty_is_sentinel():
    assert math.isnan(shannon_entropy(np.zeros(0)))
    with pytest.raises(ValueError):
        shannon_entropy(np.ones(4), n_bins=1)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0), st.floats(-10, 10))
def test_shannon_affine_invariant(seed, a, b):
    # rounded data puts many values exactly on bin edges
    x = np.round(np.random.default_rng(seed).standard_normal(500), 2)
    assert shannon_entropy(a * x + b, 16) == shannon_entropy(x, 16)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0), st.floats(-10, 10))
def test_shannon_reflection_invariant(seed, a, b):
    # mirroring swaps bins; with continuous data no value sits on an interior edge
    x = np.random.default_rng(seed).standard_normal(500)
    assert shannon_entropy(-a * x + b, 16) == shannon_entropy(x, 16)


def test_higuchi_line_and_noise():
    assert higuchi_fd(np.arange(1000.0)) == pytest.approx(1.0, abs=0.05)
    noise = np.random.default_rng(0).standard_normal(10_000)
    assert higuchi_fd(noise) == pytest.approx(2.0, abs=0.1)


def test_higuchi_constant_sentinel_and_length():
    assert higuchi_fd(np.full(500, 2.0)) == 1.0
    with pytest.raises(ValueError):
        higuchi_fd(np.arange(50.0), k_max=10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_higuchi_scale_invariant(seed, g):
    x = np.random.default_rng(seed).standard_normal(400).cumsum()
    assert higuchi_fd(g * x) == pytest.approx(higuchi_fd(x), abs=1e-9)


def test_permutation_entropy_ramp():
    assert permutation_entropy(np.arange(100.0)) == 0.0


def test_permutation_entropy_all_patterns_equal():
    # an 8-sample sequence whose 6 sliding windows hit each order-3 pattern once
    for perm in itertools.permutations(range(8)):
        x = np.array(perm, dtype=float)
        if len(set(ordinal_patterns(x, 3, 1).tolist())) == 6:
            break
    assert permutation_entropy(x, 3) == pytest.approx(1.0, abs=1e-15)


def test_permutation_entropy_noise():
    x = np.random.default_rng(0).uniform(size=10_000)
    assert permutation_entropy(x, 3) >= 0.998


def test_permutation_entropy_errors():
    assert math.isnan(permutation_entropy(np.arange(3.0)))
    with pytest.raises(ValueError):
        permutation_entropy(np.arange(100.0), order=2)
    with pytest.raises(ValueError):
        permutation_entropy(np.arange(100.0), delay=0)


def _brute_pe(x, order):
    counts = {}
    for i in range(len(x) - order + 1):
        key = tuple(sorted(range(order), key=lambda j: (x[i + j], j)))
        counts[key] = counts.get(key, 0) + 1
    p = np.array(list(counts.values())) / sum(counts.values())
    return max(0.0, float(-np.sum(p * np.log(p)) / math.log(math.factorial(order))))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=6, max_size=60), st.integers(3, 5))
def test_permutation_entropy_matches_brute_force_with_ties(vals, order):
    x = np.array(vals, dtype=float)
    if x.size <= order:
        return
    assert permutation_entropy(x, order) == pytest.approx(_brute_pe(x, order), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_permutation_entropy_monotone_invariant(seed):
    x = np.random.default_rng(seed).standard_normal(300)
    assert permutation_entropy(np.exp(x)) == permutation_entropy(x)
    assert permutation_entropy(x ** 3 + 2 * x) == permutation_entropy(x)


def test_multiscale_pe():
    x = np.random.default_rng(1).standard_normal(10_000)
    m = multiscale_pe(x)
    assert m.size == 5
    assert m[0] == permutation_entropy(x)
    assert m[4] <= m[0] + 0.01
    assert np.all(m >= 0.95)
    assert np.all(multiscale_pe(np.arange(2000.0)) == 0.0)


def test_multiscale_pe_truncates():
    m = multiscale_pe(np.random.default_rng(0).standard_normal(12), n_scales=5)
    assert 0 < m.size < 5
    assert np.array_equal(coarse_grain(np.arange(6.0), 2), [0.5, 2.5, 4.5])


def test_summary_bounds():
    s = summarize(np.random.default_rng(2).standard_normal(3000))
    assert 0 <= s.shannon_entropy <= 6
    assert np.all((s.mspe >= 0) & (s.mspe <= 1))
    assert math.isfinite(s.higuchi_fd)
    empty = summarize(np.zeros(0))
    assert math.isnan(empty.shannon_entropy) and empty.n_scales == 0
