import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from distill_equiv.equivalence import (
    CANDIDATES,
    Verdict,
    candidate_gradient,
    check_zero_sum,
    check_zero_sum_ce,
    equivalence_report,
    fit_rate,
    plateau_level,
    temperature_sweep,
)
from distill_equiv.errors import DegenerateFitError, InvalidInputError

Z_T = np.array([1.0, -1.0, 0.0])
Z_S = np.array([0.5, 0.0, -0.5])


@given(
    st.integers(2, 200).flatmap(
        lambda K: st.tuples(
            arrays(np.float64, K, elements=st.floats(-5, 5)),
            arrays(np.float64, K, elements=st.floats(-5, 5)),
        )
    ),
    st.floats(0.1, 1e6),
)
def test_kd_gradient_zero_sum(pair, T):
    assert check_zero_sum(*pair, T) <= 1e-12


@given(arrays(np.float64, 50, elements=st.floats(-5, 5)), st.integers(0, 49))
def test_ce_gradient_zero_sum(z, cls):
    y = np.zeros(50)
    y[cls] = 1.0
    assert check_zero_sum_ce(y, z) <= 1e-12


def test_sweep_rate_is_minus_one():
    res = temperature_sweep(Z_T, Z_S)
    assert res.fitted_rate == pytest.approx(-1.0, abs=0.01)
    assert np.all(np.diff(res.errors) < 0)


def test_two_classes_converge_at_second_order():
    # for K=2 the first-order term of the expansion vanishes
    res = temperature_sweep([1.0, -0.5], [0.3, 0.9])
    assert res.fitted_rate == pytest.approx(-2.0, abs=0.05)


def test_plus_sign_candidate_plateaus():
    z_s = Z_S + 1.5
    res = temperature_sweep(Z_T, z_s, candidate="plus-sign")
    assert abs(res.fitted_rate) <= 0.1
    assert res.error_at_max == pytest.approx(plateau_level(Z_T, z_s), rel=1e-3)
    assert plateau_level(Z_T, z_s) == pytest.approx(2 * 1.5 / 3)


def test_candidates_coincide_for_equal_means():
    grads = [candidate_gradient(c, Z_T, Z_S) for c in CANDIDATES]
    for g in grads[1:]:
        np.testing.assert_allclose(g, grads[0], atol=1e-16)


def test_unknown_candidate():
    with pytest.raises(InvalidInputError):
        candidate_gradient("minus-sign", Z_T, Z_S)


def test_identical_logits_give_a_degenerate_fit():
    with pytest.raises(DegenerateFitError) as err:
        temperature_sweep(Z_T, Z_T)
    assert np.all(err.value.result.errors <= 1e-13)


def test_sweep_grid_validation():
    with pytest.raises(InvalidInputError):
        temperature_sweep(Z_T, Z_S, [1e3, 1e2])
    with pytest.raises(InvalidInputError):
        temperature_sweep(Z_T, Z_S, [1.0, 1e3])
    with pytest.raises(InvalidInputError):
        temperature_sweep(Z_T, Z_S, [])


def test_fit_rate_recovers_a_power_law():
    T = np.array([1e2, 1e3, 1e4])
    slope, intercept, n = fit_rate(T, 3.0 * T**-1.5)
    assert slope == pytest.approx(-1.5)
    assert math.exp(intercept) == pytest.approx(3.0)
    assert n == 3
    assert math.isnan(fit_rate(T, [1.0, 0.0, 0.0])[0])


def test_report_exact_equivalence():
    rep = equivalence_report(Z_T, Z_S)
    assert rep.verdict is Verdict.EXACT_EQUIVALENT
    assert rep.max_gap_at_Tmax <= 1e-5
    assert rep.reg_term_magnitude == 0.0


def test_report_with_regulariser():
    rep = equivalence_report(Z_T, Z_S + 0.9)
    assert rep.verdict is Verdict.EQUIVALENT_WITH_REGULARIZER
    assert rep.reg_term_magnitude == pytest.approx(0.3)
    assert rep.max_gap_at_Tmax == pytest.approx(0.3, rel=1e-4)


def test_report_needs_a_high_enough_temperature():
    with pytest.raises(InvalidInputError):
        equivalence_report([100.0, 0.0], [0.0, 0.0], T_max=1e3)
