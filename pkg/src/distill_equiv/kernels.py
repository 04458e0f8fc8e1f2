"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

Public names (``kd_grad``, ``kd_grad_rows``, ``descend``) are bound to the
flavour chosen by :mod:`distill_equiv._backend`. Both flavours stay importable
under their suffixed names so tests and the benchmark can compare them.

All kernels expect validated float64 input; validation lives in the callers.
"""

import math

import numpy as np

from ._backend import USE_NUMBA, njit

# Field kinds understood by ``descend``.
FIELD_KD = 0
FIELD_CE = 1
FIELD_LM = 2

# Below this (most negative) scaled, max-shifted logit the expm1 expansion is
# used; the plain ratio form cancels catastrophically once T dwarfs the logits.
_EXPANSION_CUTOFF = -1.0


def kd_grad_numpy(z_t, z_s, T):
    """``T * (softmax(z_s/T) - softmax(z_t/T))`` without cancellation.

    With ``u = (z - max z)/T`` and ``e = expm1(u)`` the probabilities are
    ``(1 + e_i)/(K + E)``. Expanding the difference over a common
    denominator leaves only terms of order ``u``, so the result keeps full
    relative precision as ``T`` grows and its components sum to zero up to
    rounding of quantities of size ``|u|`` instead of size 1.
    """
    K = z_s.shape[0]
    us = (z_s - z_s.max()) / T
    ut = (z_t - z_t.max()) / T
    if min(us.min(), ut.min()) >= _EXPANSION_CUTOFF:
        es = np.expm1(us)
        et = np.expm1(ut)
        Es = es.sum()
        Et = et.sum()
        num = K * (es - et) + (Et - Es) + (es * Et - et * Es)
        return T * num / ((K + Es) * (K + Et))
    a = np.exp(us)
    b = np.exp(ut)
    return T * (a / a.sum() - b / b.sum())


def kd_grad_rows_numpy(Zt, Zs, T):
    out = np.empty_like(Zs)
    for r in range(Zs.shape[0]):
        out[r] = kd_grad_numpy(Zt[r], Zs[r], T)
    return out


@njit(cache=True)
def kd_grad_numba(z_t, z_s, T):
    K = z_s.shape[0]
    ms = z_s[0]
    mt = z_t[0]
    for i in range(1, K):
        if z_s[i] > ms:
            ms = z_s[i]
        if z_t[i] > mt:
            mt = z_t[i]
    us = np.empty(K)
    ut = np.empty(K)
    umin = 0.0
    for i in range(K):
        us[i] = (z_s[i] - ms) / T
        ut[i] = (z_t[i] - mt) / T
        if us[i] < umin:
            umin = us[i]
        if ut[i] < umin:
            umin = ut[i]
    out = np.empty(K)
    if umin >= -1.0:
        Es = 0.0
        Et = 0.0
        for i in range(K):
            us[i] = math.expm1(us[i])
            ut[i] = math.expm1(ut[i])
            Es += us[i]
            Et += ut[i]
        denom = (K + Es) * (K + Et)
        for i in range(K):
            num = K * (us[i] - ut[i]) + (Et - Es) + (us[i] * Et - ut[i] * Es)
            out[i] = T * num / denom
    else:
        sa = 0.0
        sb = 0.0
        for i in range(K):
            us[i] = math.exp(us[i])
            ut[i] = math.exp(ut[i])
            sa += us[i]
            sb += ut[i]
        for i in range(K):
            out[i] = T * (us[i] / sa - ut[i] / sb)
    return out


@njit(cache=True)
def kd_grad_rows_numba(Zt, Zs, T):
    out = np.empty_like(Zs)
    for r in range(Zs.shape[0]):
        out[r] = kd_grad_numba(Zt[r], Zs[r], T)
    return out


def descend_numpy(z0, kind, target, T, steps, lr, cap):
    """Plain gradient descent on free logits for a built-in field.

    Returns ``(z_final, means, diverged_at)`` where ``means[k]`` is the logit
    mean after ``k`` updates and ``diverged_at`` is the first step whose
    iterate exceeds ``cap`` in magnitude (-1 if none).
    """
    K = z0.shape[0]
    z = z0.copy()
    means = np.empty(steps + 1)
    means[0] = math.fsum(z) / K
    for k in range(1, steps + 1):
        if kind == FIELD_KD:
            g = kd_grad_numpy(target, z, T)
        elif kind == FIELD_CE:
            e = np.exp(z - z.max())
            g = e / e.sum() - target
        else:
            g = (z - target) / K
        z -= lr * g
        means[k] = math.fsum(z) / K
        if np.abs(z).max() > cap:
            return z, means[: k + 1], k
    return z, means, -1


@njit(cache=True)
def _neumaier_mean(z):
    s = 0.0
    c = 0.0
    for v in z:
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return (s + c) / z.shape[0]


@njit(cache=True)
def descend_numba(z0, kind, target, T, steps, lr, cap):
    K = z0.shape[0]
    z = z0.copy()
    g = np.empty(K)
    means = np.empty(steps + 1)
    means[0] = _neumaier_mean(z)
    for k in range(1, steps + 1):
        if kind == 0:
            g = kd_grad_numba(target, z, T)
        elif kind == 1:
            m = z.max()
            s = 0.0
            for i in range(K):
                g[i] = math.exp(z[i] - m)
                s += g[i]
            for i in range(K):
                g[i] = g[i] / s - target[i]
        else:
            for i in range(K):
                g[i] = (z[i] - target[i]) / K
        big = 0.0
        for i in range(K):
            z[i] -= lr * g[i]
            if abs(z[i]) > big:
                big = abs(z[i])
        means[k] = _neumaier_mean(z)
        if big > cap:
            return z, means[: k + 1], k
    return z, means, -1


if USE_NUMBA:
    kd_grad = kd_grad_numba
    kd_grad_rows = kd_grad_rows_numba
    descend = descend_numba
else:
    kd_grad = kd_grad_numpy
    kd_grad_rows = kd_grad_rows_numpy
    descend = descend_numpy
