"""Scalar losses on a single (teacher, student) logit pair.

Additive constants that do not depend on the student logits are dropped,
except in :func:`kd_loss`, which keeps the teacher entropy so the value is a
true KL divergence.
"""

from typing import NamedTuple

import numpy as np

from .errors import KdDivergenceError, InvalidInputError
from .numerics import (
    as_labels,
    as_pair,
    as_temperature,
    as_vector,
    is_finite_scalar,
    log_sum_exp,
    xp_exp,
    xp_expm1,
    xp_log,
    xp_log1p,
)


class MeanOffsets(NamedTuple):
    """Initial logit means of the student (``c_s``) and teacher (``c_t``)."""

    c_s: float
    c_t: float


def check_offsets(offsets):
    c_s, c_t = (float(v) for v in offsets)
    if not (np.isfinite(c_s) and np.isfinite(c_t)):
        raise InvalidInputError("mean offsets must be finite")
    return MeanOffsets(c_s, c_t)


def check_reg_sign(reg_sign):
    if reg_sign not in (1, -1):
        raise InvalidInputError(f"reg_sign must be +1 or -1, got {reg_sign!r}")
    return int(reg_sign)


def lm_loss(z_t, z_s):
    """Logits matching: ``sum((z_t - z_s)**2) / (2K)``."""
    z_t, z_s = as_pair(z_t, z_s)
    d = z_t - z_s
    return (d * d).sum() / (2 * d.shape[0])


def _log_softmax(z, T):
    u = (z - z.max()) / T
    return u - xp_log(xp_exp(u).sum())


def kd_loss(z_t, z_s, T):
    """KL(p_t || p_s) between temperature-softened distributions.

    With ``d = (z_t - z_s)/T`` the log-ratio is ``d_i - log(S_t/S_s)`` and
    ``S_t/S_s = sum_j p_s_j exp(d_j)``, so

        KL = sum_i p_t_i d_i - log1p(sum_j p_s_j expm1(d_j)).

    Both terms are O(|d|) and nothing of order ``log K`` cancels, which keeps
    ``T**2 * KL`` accurate at large T. KL does not change when a constant is
    added to ``d``, so ``d`` is first centred on its midrange; a pure shift
    between teacher and student then gives exactly 0. Once the centred
    ``|d|`` exceeds 1 the log1p argument can approach -1 and cancel, so the
    plain log-domain sum is used there instead. Terms with ``p_t = 0``
    contribute nothing.
    """
    z_t, z_s = as_pair(z_t, z_s)
    T = as_temperature(T)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        log_pt = _log_softmax(z_t, T)
        log_ps = _log_softmax(z_s, T)
        pt = xp_exp(log_pt)
        d = (z_t - z_s) / T
        d = d - (d.max() + d.min()) / 2
        if all(is_finite_scalar(v) for v in d) and abs(d).max() <= 1:
            return (pt * d).sum() - xp_log1p((xp_exp(log_ps) * xp_expm1(d)).sum())
    live = pt > 0
    if not all(is_finite_scalar(v) for v in log_ps[live]):
        raise KdDivergenceError("student probability underflowed to 0 where the teacher's is positive: KL is infinite")
    return (pt[live] * (log_pt[live] - log_ps[live])).sum()


def lm_reg_loss(z_t, z_s, offsets, reg_sign=-1):
    """Logits matching plus the linear mean-offset regulariser.

    ``lm_loss + reg_sign * (c_s - c_t)/K * sum(z_s)``. ``reg_sign=+1`` is the
    form with a plus sign; ``-1`` is the one whose gradient agrees with the
    infinite-temperature KD gradient (see :mod:`distill_equiv.equivalence`).
    """
    z_t, z_s = as_pair(z_t, z_s)
    c_s, c_t = check_offsets(offsets)
    sign = check_reg_sign(reg_sign)
    weight = sign * (c_s - c_t) / z_s.shape[0]
    return lm_loss(z_t, z_s) + weight * z_s.sum()


def ce_loss(y, z):
    """Cross-entropy at T=1 in logit form: ``-sum(y*z) + logsumexp(z)``."""
    z = as_vector(z)
    y = as_labels(y, z.shape[0])
    return -(y * z).sum() + log_sum_exp(z)


def ce_lower_bound(y, z):
    """Linear lower bound ``-sum(y*z) + sum(z)`` of :func:`ce_loss`.

    Only a bound when ``sum(z) <= logsumexp(z)``, e.g. for zero-mean logits;
    ``z = (10, 10)`` breaks it.
    """
    z = as_vector(z)
    y = as_labels(y, z.shape[0])
    return -(y * z).sum() + z.sum()
