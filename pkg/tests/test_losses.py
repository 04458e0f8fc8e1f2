import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from distill_equiv.errors import InvalidInputError, KdDivergenceError
from distill_equiv.losses import ce_loss, ce_lower_bound, kd_loss, lm_loss, lm_reg_loss
from distill_equiv.numerics import softmax


def _kl_reference(z_t, z_s, T):
    import mpmath

    with mpmath.workdps(50):
        def probs(z):
            e = [mpmath.exp(mpmath.mpf(float(v)) / T) for v in z]
            s = mpmath.fsum(e)
            return [v / s for v in e]

        pt, ps = probs(z_t), probs(z_s)
        return float(mpmath.fsum(a * mpmath.log(a / b) for a, b in zip(pt, ps)))


pairs = st.integers(2, 30).flatmap(
    lambda K: st.tuples(
        arrays(np.float64, K, elements=st.floats(-8, 8)),
        arrays(np.float64, K, elements=st.floats(-8, 8)),
    )
)


def test_lm_loss_value():
    assert lm_loss([1.0, 2.0], [0.0, 0.0]) == pytest.approx(5 / 4)


@given(pairs, st.floats(0.2, 1e5))
def test_kd_loss_matches_multiprecision_kl(pair, T):
    z_t, z_s = pair
    ref = _kl_reference(z_t, z_s, T)
    assert kd_loss(z_t, z_s, T) == pytest.approx(ref, rel=1e-9, abs=1e-15)


@given(pairs, st.floats(0.1, 100))
def test_kd_loss_nonnegative_and_zero_at_teacher(pair, T):
    z_t, z_s = pair
    assert kd_loss(z_t, z_s, T) >= -1e-15
    assert abs(kd_loss(z_t, z_t, T)) <= 1e-15


def test_kd_loss_large_temperature_scales_like_mse_of_centred_logits():
    z_t = np.array([1.0, -0.5, 2.0])
    z_s = np.array([0.0, 0.5, 1.0])
    T = 1e6
    d = (z_t - z_t.mean()) - (z_s - z_s.mean())
    assert T * T * kd_loss(z_t, z_s, T) == pytest.approx((d**2).mean() / 2, rel=1e-5)


def test_kd_loss_far_apart_but_finite():
    # log p_s stays finite even though p_s itself underflows
    assert kd_loss([0.0, 0.0], [0.0, -1e6], 0.1) == pytest.approx(5e6 - math.log(2))


def test_kd_loss_infinite_when_student_log_probability_overflows():
    with pytest.raises(KdDivergenceError):
        kd_loss([0.0, 0.0], [0.0, -1e300], 1e-10)


@given(pairs, st.floats(-100, 100), st.floats(0.1, 1e4))
def test_kd_loss_of_shifted_copy_is_zero(pair, c, T):
    z_t, _ = pair
    assert kd_loss(z_t, z_t + c, T) == pytest.approx(0.0, abs=1e-15)


def test_kd_loss_ignores_zero_teacher_probability():
    # the teacher puts no mass on class 1, so the student's tiny mass there is irrelevant
    val = kd_loss([0.0, -1e6], [0.0, -1e6], 0.1)
    assert val == pytest.approx(0.0, abs=1e-300)


def test_lm_reg_loss_adds_linear_term():
    z_t, z_s = np.array([1.0, 2.0, 3.0]), np.array([0.0, 1.0, 5.0])
    base = lm_loss(z_t, z_s)
    assert lm_reg_loss(z_t, z_s, (2.0, 1.0), -1) == pytest.approx(base - (1 / 3) * 6)
    assert lm_reg_loss(z_t, z_s, (2.0, 1.0), 1) == pytest.approx(base + (1 / 3) * 6)
    with pytest.raises(InvalidInputError):
        lm_reg_loss(z_t, z_s, (2.0, 1.0), 0)


def test_ce_loss_matches_negative_log_probability():
    z = np.array([0.3, -1.2, 2.0])
    assert ce_loss([0.0, 0.0, 1.0], z) == pytest.approx(-math.log(softmax(z)[2]))


def test_ce_loss_stable_for_huge_logits():
    assert ce_loss([1.0, 0.0], [1000.0, 0.0]) == pytest.approx(0.0, abs=1e-300)
    assert ce_loss([0.0, 1.0], [1000.0, 0.0]) == pytest.approx(1000.0)


@given(st.integers(2, 50).flatmap(lambda K: arrays(np.float64, K, elements=st.floats(-10, 10))))
def test_lower_bound_holds_for_zero_mean_logits(z):
    z = z - math.fsum(z) / z.shape[0]
    y = np.zeros(z.shape[0])
    y[0] = 1.0
    assert ce_loss(y, z) - ce_lower_bound(y, z) >= math.log(z.shape[0]) - 1e-12


def test_lower_bound_fails_for_shifted_logits():
    y = np.array([1.0, 0.0])
    assert ce_lower_bound(y, [10.0, 10.0]) > ce_loss(y, [10.0, 10.0])
