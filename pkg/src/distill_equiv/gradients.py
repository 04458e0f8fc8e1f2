"""Analytic logit gradients of every loss and a central-difference oracle."""

from dataclasses import dataclass

import mpmath
import numpy as np

from . import kernels
from .errors import InvalidInputError
from .losses import check_offsets, check_reg_sign
from .numerics import as_labels, as_pair, as_temperature, as_vector, mean, softmax


def grad_lm(z_t, z_s):
    z_t, z_s = as_pair(z_t, z_s)
    return (z_s - z_t) / z_s.shape[0]


def grad_kd_scaled(z_t, z_s, T):
    """Gradient of ``T**2 * kd_loss`` w.r.t. the student logits, ``T*(p_s - p_t)``."""
    z_t, z_s = as_pair(z_t, z_s)
    T = as_temperature(T)
    return kernels.kd_grad(z_t.astype(np.float64), z_s.astype(np.float64), T)


def grad_ce(y, z):
    z = as_vector(z)
    y = as_labels(y, z.shape[0])
    return softmax(z, 1.0) - y


def grad_lm_reg(z_t, z_s, offsets, reg_sign=-1):
    """Gradient of :func:`~distill_equiv.losses.lm_reg_loss`; offsets are frozen constants."""
    c_s, c_t = check_offsets(offsets)
    sign = check_reg_sign(reg_sign)
    g = grad_lm(z_t, z_s)
    return g + sign * (c_s - c_t) / g.shape[0]


def limit_gradient(z_t, z_s):
    """Infinite-temperature limit of :func:`grad_kd_scaled`.

    ``((z_s - mean(z_s)) - (z_t - mean(z_t))) / K``: invariant to constant
    shifts of either vector, like the KD gradient itself. With equal means it
    is the LM gradient, returned as such to avoid two extra roundings.
    """
    z_t, z_s = as_pair(z_t, z_s)
    c_s, c_t = mean(z_s), mean(z_t)
    if c_s == c_t:
        return grad_lm(z_t, z_s)
    return ((z_s - c_s) - (z_t - c_t)) / z_s.shape[0]


@dataclass(frozen=True)
class FdConfig:
    """Central-difference settings.

    ``precision`` selects how the loss is evaluated at the perturbed points:
    ``float64``, ``extended`` (``np.longdouble`` copies) or ``mp`` (mpmath at
    ``mp_dps`` digits). The analytic side is never touched; extra precision
    only lowers the oracle's rounding noise, roughly ``eps * |loss| / h``.
    """

    step: float = 1e-5
    precision: str = "extended"
    mp_dps: int = 40

    def __post_init__(self):
        if not 1e-8 <= self.step <= 1e-2:
            raise InvalidInputError(f"finite-difference step must lie in [1e-8, 1e-2], got {self.step}")
        if self.precision not in ("float64", "extended", "mp"):
            raise InvalidInputError(f"precision must be 'float64', 'extended' or 'mp', got {self.precision!r}")


def _fd_components(loss, z, idx, cfg):
    if cfg.precision == "mp":
        with mpmath.workdps(cfg.mp_dps):
            zz = np.array([mpmath.mpf(float(v)) for v in z], dtype=object)
            h = mpmath.mpf(cfg.step)
            out = np.empty(len(idx))
            for k, i in enumerate(idx):
                zp = zz.copy()
                zm = zz.copy()
                zp[i] += h
                zm[i] -= h
                out[k] = float((loss(zp) - loss(zm)) / (2 * h))
            return out
    dtype = np.longdouble if cfg.precision == "extended" else np.float64
    zz = np.asarray(z, dtype=dtype)
    h = dtype(cfg.step)
    out = np.empty(len(idx))
    for k, i in enumerate(idx):
        zp = zz.copy()
        zm = zz.copy()
        zp[i] += h
        zm[i] -= h
        out[k] = (loss(zp) - loss(zm)) / (2 * h)
    return out


def fd_gradient(loss, z, cfg=FdConfig()):
    """``(loss(z + h e_i) - loss(z - h e_i)) / (2h)`` for every component i."""
    z = np.asarray(z, dtype=np.float64)
    return _fd_components(loss, z, range(z.shape[0]), cfg)


def relative_error(analytic, numeric, floor=1e-8):
    """Max over components of ``|a - f| / max(floor, |a| + |f|)``."""
    a = np.asarray(analytic, dtype=np.float64)
    f = np.asarray(numeric, dtype=np.float64)
    return float(np.max(_component_errors(a, f, floor)))


@dataclass
class GradientReport:
    analytic: np.ndarray
    numeric: np.ndarray
    component_sum: float
    max_rel_err: float
    max_abs_err: float


def _component_errors(a, f, floor=1e-8):
    return np.abs(a - f) / np.maximum(floor, np.abs(a) + np.abs(f))


def check_gradient(loss, analytic, z, cfg=FdConfig(), tol=None):
    """Compare an analytic gradient at ``z`` against :func:`fd_gradient` of ``loss``.

    With ``tol`` set, components whose error at ``cfg.precision`` exceeds
    ``tol / 10`` are re-differenced in multiprecision before the verdict:
    near-zero components need absolute accuracy below the working-precision
    noise floor.
    """
    a = np.asarray(analytic, dtype=np.float64)
    f = fd_gradient(loss, z, cfg)
    if tol is not None and cfg.precision != "mp":
        bad = np.flatnonzero(_component_errors(a, f) > 0.1 * tol)
        if bad.size:
            mp_cfg = FdConfig(step=cfg.step, precision="mp", mp_dps=cfg.mp_dps)
            f[bad] = _fd_components(loss, np.asarray(z, dtype=np.float64), bad, mp_cfg)
    return GradientReport(
        analytic=a,
        numeric=f,
        component_sum=float(a.sum()),
        max_rel_err=relative_error(a, f),
        max_abs_err=float(np.max(np.abs(a - f))),
    )
