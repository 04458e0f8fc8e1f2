"""Executable checks of the KD / logits-matching equivalence.

* zero-sum audits of the scaled-KD and cross-entropy logit gradients,
* temperature sweeps measuring how fast ``T*(p_s - p_t)`` approaches a
  candidate infinite-temperature limit, with a log-log rate fit,
* the equal-mean equivalence report.

Three limit candidates are swept. ``mean-centered`` is
``((z_s - c_s) - (z_t - c_t))/K``, ``plus-sign`` is ``(z_s - z_t + c_s - c_t)/K``
and ``plain-lm`` is ``(z_s - z_t)/K``. They agree when ``c_s == c_t``;
otherwise only the mean-centered one is consistent with the shift invariance
of the KD gradient, and the sweep shows the plus-sign form stalling at
``2|c_s - c_t|/K``.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFitError, InvalidInputError
from .gradients import grad_ce, grad_kd_scaled, grad_lm, grad_lm_reg, limit_gradient
from .numerics import as_pair, as_temperature, mean

CANDIDATES = ("mean-centered", "plus-sign", "plain-lm")

DEFAULT_T_GRID = (1e2, 1e3, 1e4, 1e5, 1e6)
# errors at or below this are rounding noise and stay out of the rate fit
FIT_FLOOR = 1e-13


def check_zero_sum(z_t, z_s, T):
    """``|sum_i grad_kd_scaled_i|``, summed exactly."""
    return abs(math.fsum(grad_kd_scaled(z_t, z_s, T)))


def check_zero_sum_ce(y, z):
    return abs(math.fsum(grad_ce(y, z)))


def candidate_gradient(candidate, z_t, z_s):
    if candidate == "mean-centered":
        return limit_gradient(z_t, z_s)
    if candidate == "plus-sign":
        return grad_lm_reg(z_t, z_s, (mean(z_s), mean(z_t)), reg_sign=1)
    if candidate == "plain-lm":
        return grad_lm(z_t, z_s)
    raise InvalidInputError(f"unknown limit candidate {candidate!r}; expected one of {CANDIDATES}")


def plateau_level(z_t, z_s):
    """Distance between the plus-sign and mean-centered candidates."""
    z_t, z_s = as_pair(z_t, z_s)
    return 2 * abs(mean(z_s) - mean(z_t)) / z_s.shape[0]


def fit_rate(temperatures, errors, floor=FIT_FLOOR):
    """Least-squares slope and intercept of ``log(error)`` against ``log(T)``.

    Points with ``error <= floor`` are dropped. Returns ``(slope, intercept,
    n_used)``; slope and intercept are NaN when fewer than two points remain.
    """
    t = np.asarray(temperatures, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    keep = e > floor
    if keep.sum() < 2:
        return math.nan, math.nan, int(keep.sum())
    slope, intercept = np.polyfit(np.log(t[keep]), np.log(e[keep]), 1)
    return float(slope), float(intercept), int(keep.sum())


@dataclass
class SweepResult:
    temperatures: np.ndarray
    errors: np.ndarray
    fitted_rate: float
    candidate_id: str

    @property
    def error_at_max(self):
        return float(self.errors[-1])


def check_t_grid(T_grid):
    grid = np.array([as_temperature(T) for T in T_grid], dtype=np.float64)
    if grid.size == 0:
        raise InvalidInputError("temperature grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise InvalidInputError("temperature grid must be strictly ascending")
    return grid


def temperature_sweep(z_t, z_s, T_grid=DEFAULT_T_GRID, candidate="mean-centered"):
    """Max-norm distance between ``grad_kd_scaled`` and a limit candidate over ``T_grid``.

    Raises :class:`DegenerateFitError` (carrying the result) when fewer than
    two errors clear the rounding floor, e.g. for ``z_t == z_s``.
    """
    z_t, z_s = as_pair(z_t, z_s)
    grid = check_t_grid(T_grid)
    zmax = max(np.abs(z_t).max(), np.abs(z_s).max())
    if grid[0] < 10 * zmax:
        raise InvalidInputError(f"smallest temperature {grid[0]:g} is below 10*max|z| = {10 * zmax:g}")
    target = candidate_gradient(candidate, z_t, z_s)
    errors = np.array([np.abs(grad_kd_scaled(z_t, z_s, T) - target).max() for T in grid])
    slope, _, used = fit_rate(grid, errors)
    result = SweepResult(temperatures=grid, errors=errors, fitted_rate=slope, candidate_id=candidate)
    if used < 2:
        raise DegenerateFitError(f"only {used} sweep errors exceed {FIT_FLOOR:g}; rate is undefined", result)
    return result


class Verdict(str, enum.Enum):
    EXACT_EQUIVALENT = "EXACT_EQUIVALENT"
    EQUIVALENT_WITH_REGULARIZER = "EQUIVALENT_WITH_REGULARIZER"


@dataclass
class EquivalenceReport:
    c_s: float
    c_t: float
    max_gap_at_Tmax: float
    reg_term_magnitude: float
    verdict: Verdict


def equivalence_report(z_t, z_s, T_max=1e6, tol=1e-9):
    """Compare the high-temperature KD gradient with plain logits matching."""
    z_t, z_s = as_pair(z_t, z_s)
    T_max = as_temperature(T_max)
    zmax = max(np.abs(z_t).max(), np.abs(z_s).max())
    if T_max < 100 * zmax:
        raise InvalidInputError(f"T_max={T_max:g} is below 100*max|z| = {100 * zmax:g}")
    c_s, c_t = mean(z_s), mean(z_t)
    gap = float(np.abs(grad_kd_scaled(z_t, z_s, T_max) - grad_lm(z_t, z_s)).max())
    verdict = Verdict.EXACT_EQUIVALENT if abs(c_s - c_t) <= tol else Verdict.EQUIVALENT_WITH_REGULARIZER
    return EquivalenceReport(
        c_s=c_s,
        c_t=c_t,
        max_gap_at_Tmax=gap,
        reg_term_magnitude=abs(c_s - c_t) / z_s.shape[0],
        verdict=verdict,
    )
