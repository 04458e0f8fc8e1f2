import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from distill_equiv.errors import DimensionMismatchError, InvalidInputError
from distill_equiv.numerics import (
    as_labels,
    as_pair,
    as_temperature,
    as_vector,
    derive_seed,
    log_sum_exp,
    make_rng,
    mean,
    softmax,
)

logits = st.integers(2, 50).flatmap(
    lambda K: arrays(np.float64, K, elements=st.floats(-50, 50, allow_nan=False))
)


@given(logits, st.floats(0.05, 1e6))
def test_softmax_is_a_distribution(z, T):
    p = softmax(z, T)
    assert np.all(p >= 0)
    assert math.fsum(p) == pytest.approx(1.0, abs=1e-14)


@given(logits, st.floats(-100, 100))
def test_softmax_ignores_constant_shift(z, c):
    np.testing.assert_allclose(softmax(z + c), softmax(z), rtol=1e-12, atol=1e-300)


def test_softmax_extreme_logits_do_not_overflow():
    p = softmax([1000.0, 0.0, -1000.0])
    np.testing.assert_array_equal(p, [1.0, 0.0, 0.0])


def test_softmax_high_temperature_tends_to_uniform():
    p = softmax([3.0, -1.0, 0.5, 2.0], T=1e8)
    np.testing.assert_allclose(p, 0.25, rtol=1e-7)


@given(logits)
def test_log_sum_exp_matches_mpmath(z):
    ref = mpmath.log(mpmath.fsum(mpmath.exp(mpmath.mpf(float(v))) for v in z))
    assert float(log_sum_exp(z)) == pytest.approx(float(ref), rel=1e-14, abs=1e-14)


def test_log_sum_exp_bounds():
    z = np.array([2.0, -1.0, 0.3])
    assert z.max() <= log_sum_exp(z) <= z.max() + math.log(3)


def test_mean_is_exactly_rounded():
    z = np.array([1e16, 1.0, -1e16, 1.0])
    assert mean(z) == 0.5


def test_longdouble_and_mp_inputs_keep_their_precision():
    assert as_vector(np.ones(3, dtype=np.longdouble)).dtype == np.longdouble
    z = np.array([mpmath.mpf(1), mpmath.mpf(2)], dtype=object)
    assert isinstance(softmax(z)[0], mpmath.mpf)


@pytest.mark.parametrize(
    "bad",
    [[1.0], [[1.0, 2.0]], [1.0, math.nan], [math.inf, 0.0], ["a", "b"]],
)
def test_as_vector_rejects(bad):
    with pytest.raises(InvalidInputError):
        as_vector(bad)


def test_as_pair_requires_equal_length():
    with pytest.raises(DimensionMismatchError):
        as_pair([1.0, 2.0], [1.0, 2.0, 3.0])


@pytest.mark.parametrize("T", [0, -1.0, math.inf, math.nan, "hot"])
def test_bad_temperature(T):
    with pytest.raises(InvalidInputError):
        as_temperature(T)


def test_labels_must_form_a_distribution():
    as_labels([0.25, 0.75])
    with pytest.raises(InvalidInputError):
        as_labels([0.5, 0.6])
    with pytest.raises(InvalidInputError):
        as_labels([1.5, -0.5])
    with pytest.raises(DimensionMismatchError):
        as_labels([0.5, 0.5], K=3)


def test_seeded_streams_are_reproducible_and_distinct():
    a = make_rng(7).uniform(size=5)
    np.testing.assert_array_equal(a, make_rng(7).uniform(size=5))
    assert derive_seed(7, 1) == derive_seed(7, 1)
    assert len({derive_seed(7, k) for k in range(100)}) == 100
    assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)


@pytest.mark.parametrize("seed", [-1, 2**64, 1.5, True])
def test_bad_seed(seed):
    with pytest.raises(InvalidInputError):
        make_rng(seed)


@settings(max_examples=50)
@given(st.integers(0, 2**64 - 1), st.integers(0, 10**6))
def test_derived_seeds_fit_in_64_bits(seed, key):
    assert 0 <= derive_seed(seed, key) < 2**64
