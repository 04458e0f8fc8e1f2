"""Numeric primitives: input validation, temperature softmax, log-sum-exp,
logit means and seeded random generators.

Functions accept array-likes. float64 is the working precision. Arrays that
are already ``np.longdouble``, or object arrays of ``mpmath.mpf``, are kept in
that precision so the finite-difference oracle can evaluate losses with extra
guard digits; the ``xp_*`` helpers dispatch elementary functions accordingly.
"""

import math

import mpmath
import numpy as np

from .errors import DimensionMismatchError, InvalidInputError

SEED_MAX = 2**64 - 1


_MP_FUNCS = {
    "exp": np.frompyfunc(mpmath.exp, 1, 1),
    "expm1": np.frompyfunc(mpmath.expm1, 1, 1),
    "log": np.frompyfunc(mpmath.log, 1, 1),
    "log1p": np.frompyfunc(mpmath.log1p, 1, 1),
}


def _dispatch(name, x):
    if isinstance(x, np.ndarray) and x.dtype == object:
        return _MP_FUNCS[name](x)
    if isinstance(x, mpmath.mpf):
        return getattr(mpmath, name)(x)
    return getattr(np, name)(x)


def xp_exp(x):
    return _dispatch("exp", x)


def xp_expm1(x):
    return _dispatch("expm1", x)


def xp_log(x):
    return _dispatch("log", x)


def xp_log1p(x):
    return _dispatch("log1p", x)


def is_finite_scalar(x):
    if isinstance(x, mpmath.mpf):
        return bool(mpmath.isfinite(x))
    return bool(np.isfinite(x))


def as_vector(z, name="z", min_len=2):
    """Validate a logit-like vector and return it as a float array."""
    arr = np.asarray(z)
    if arr.dtype == object:
        try:
            arr = np.array([mpmath.mpf(v) for v in arr.ravel()], dtype=object).reshape(arr.shape)
        except (TypeError, ValueError) as exc:
            raise InvalidInputError(f"{name} is not numeric") from exc
    elif arr.dtype != np.longdouble:
        try:
            arr = arr.astype(np.float64)
        except (TypeError, ValueError) as exc:
            raise InvalidInputError(f"{name} is not numeric") from exc
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_len:
        raise InvalidInputError(f"{name} needs at least {min_len} classes, got {arr.shape[0]}")
    if arr.dtype == object:
        finite = all(mpmath.isfinite(v) for v in arr)
    else:
        finite = bool(np.all(np.isfinite(arr)))
    if not finite:
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def as_pair(z_t, z_s):
    z_t = as_vector(z_t, "z_t")
    z_s = as_vector(z_s, "z_s")
    if z_t.shape != z_s.shape:
        raise DimensionMismatchError(f"K mismatch: z_t has {z_t.shape[0]}, z_s has {z_s.shape[0]}")
    return z_t, z_s


def as_temperature(T):
    try:
        value = float(T)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"temperature {T!r} is not a number") from exc
    if not math.isfinite(value) or value <= 0.0:
        raise InvalidInputError(f"temperature must be finite and > 0, got {T!r}")
    return value


def as_labels(y, K=None, tol=1e-12):
    """Validate a (one-hot or soft) label vector summing to one."""
    y = as_vector(y, "y")
    if K is not None and y.shape[0] != K:
        raise DimensionMismatchError(f"K mismatch: y has {y.shape[0]}, logits have {K}")
    if np.any(y < 0) or np.any(y > 1):
        raise InvalidInputError("labels must lie in [0, 1]")
    if abs(math.fsum(float(v) for v in y) - 1.0) > tol:
        raise InvalidInputError("labels must sum to 1")
    return y


def softmax(z, T=1.0):
    """Temperature softmax, stabilised by subtracting the maximum logit."""
    z = as_vector(z)
    T = as_temperature(T)
    e = xp_exp((z - z.max()) / T)
    return e / e.sum()


def log_sum_exp(z):
    z = as_vector(z)
    m = z.max()
    return m + xp_log(xp_exp(z - m).sum())


def mean(z):
    """Mean logit; float64 input is summed with exact rounding (``math.fsum``)."""
    z = as_vector(z)
    if z.dtype != np.float64:
        return z.sum() / z.shape[0]
    return math.fsum(z) / z.shape[0]


def check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise InvalidInputError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise InvalidInputError(f"seed must fit in 64 unsigned bits, got {seed}")
    return seed


def make_rng(seed):
    """PCG64 generator fully determined by a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(check_seed(seed)))


def derive_seed(seed, *keys):
    """Independent 64-bit child seed for ``(seed, *keys)``.

    Used to give every run / instance its own stream so results do not depend
    on evaluation order or worker count.
    """
    ss = np.random.SeedSequence([check_seed(seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, np.uint64)[0])
