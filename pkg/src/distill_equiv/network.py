"""Small dense ReLU networks with hand-written backpropagation.

Used for three experiments:

* logit-mean statistics at initialisation under zero-mean weight schemes,
* gradient descent directly on free logits (exact mean preservation for
  zero-sum gradient fields),
* two students trained side by side, one with the scaled KD gradient and one
  with its infinite-temperature limit, both back-propagated through the net.

Weights are stored ``(d_out, d_in)``; a batch is a ``(n, d_in)`` array.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import DimensionMismatchError, DivergenceError, InvalidInputError
from .gradients import grad_ce, limit_gradient
from .numerics import as_labels, as_temperature, as_vector, derive_seed, make_rng, mean

DIVERGENCE_CAP = 1e12


@dataclass(frozen=True)
class InitScheme:
    """Zero-mean weight initialisation.

    ``fan-avg`` scales by ``2/(fan_in + fan_out)`` and ``fan-in`` by
    ``2/fan_in`` (variance); ``gain`` multiplies the resulting bound or
    standard deviation, so ``gain=0`` gives an all-zero network.
    """

    kind: str = "uniform"
    scale_rule: str = "fan-avg"
    seed: int = 0
    gain: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "normal"):
            raise InvalidInputError(f"unknown init kind {self.kind!r}")
        if self.scale_rule not in ("fan-avg", "fan-in"):
            raise InvalidInputError(f"unknown scale rule {self.scale_rule!r}")
        if not (math.isfinite(self.gain) and self.gain >= 0):
            raise InvalidInputError("gain must be finite and >= 0")

    @property
    def scheme_id(self):
        return f"{self.kind}/{self.scale_rule}/gain={self.gain:g}"

    def std(self, fan_in, fan_out):
        denom = fan_in + fan_out if self.scale_rule == "fan-avg" else fan_in
        return self.gain * math.sqrt(2.0 / denom)

    def bound(self, fan_in, fan_out):
        """Half-width of the uniform distribution (same variance as :meth:`std`)."""
        return math.sqrt(3.0) * self.std(fan_in, fan_out)


@dataclass
class MlpModel:
    layer_dims: tuple
    weights: list
    biases: list
    activation: str = "relu"
    init_scheme_id: str = ""

    @property
    def n_classes(self):
        return self.layer_dims[-1]

    def copy(self):
        return replace(
            self,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def astype(self, dtype):
        return replace(
            self,
            weights=[w.astype(dtype) for w in self.weights],
            biases=[b.astype(dtype) for b in self.biases],
        )

    def flat(self):
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def with_flat(self, theta):
        """New model with parameters taken from a flat vector (any dtype)."""
        theta = np.asarray(theta)
        weights, biases, k = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(theta[k : k + w.size].reshape(w.shape))
            k += w.size
            biases.append(theta[k : k + b.size])
            k += b.size
        if k != theta.shape[0]:
            raise DimensionMismatchError(f"expected {k} parameters, got {theta.shape[0]}")
        return replace(self, weights=weights, biases=biases)


def check_dims(layer_dims):
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise InvalidInputError(f"layer_dims must hold at least two positive sizes, got {layer_dims!r}")
    if dims[-1] < 2:
        raise InvalidInputError("the output layer needs at least 2 classes")
    return dims


def init_model(layer_dims, scheme=InitScheme()):
    dims = check_dims(layer_dims)
    rng = make_rng(scheme.seed)
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        if scheme.kind == "uniform":
            a = scheme.bound(d_in, d_out)
            w = rng.uniform(-a, a, size=(d_out, d_in))
        else:
            w = rng.normal(0.0, scheme.std(d_in, d_out), size=(d_out, d_in))
        weights.append(w)
        biases.append(np.zeros(d_out))
    return MlpModel(layer_dims=dims, weights=weights, biases=biases, init_scheme_id=scheme.scheme_id)


def _relu(a):
    return np.where(a > 0, a, 0 * a)


def _as_batch(model, x):
    x = np.asarray(x)
    if x.dtype != np.longdouble and x.dtype != object:
        x = x.astype(np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != model.layer_dims[0]:
        raise DimensionMismatchError(f"input must have {model.layer_dims[0]} features, got shape {x.shape}")
    return X, single


def _forward_cache(model, X):
    pre, acts = [], [X]
    h = X
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = h @ w.T + b
        pre.append(a)
        h = a if i == last else _relu(a)
        acts.append(h)
    return pre, acts


def forward(model, x):
    """Logits for one input vector or a ``(n, d_0)`` batch; no softmax."""
    X, single = _as_batch(model, x)
    _, acts = _forward_cache(model, X)
    return acts[-1][0] if single else acts[-1]


@dataclass
class ParamGrads:
    weights: list
    biases: list

    def flat(self):
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])


def backward(model, x, logit_grad):
    """Parameter gradients given the loss gradient w.r.t. the logits.

    For a batch the per-row contributions are summed, so pass ``logit_grad``
    already divided by ``n`` for a mean loss.
    """
    X, single = _as_batch(model, x)
    G = np.asarray(logit_grad, dtype=np.float64)
    G = G[None, :] if G.ndim == 1 else G
    if G.shape != (X.shape[0], model.n_classes):
        raise DimensionMismatchError(f"logit_grad must have shape {(X.shape[0], model.n_classes)}, got {G.shape}")
    pre, acts = _forward_cache(model, X)
    L = len(model.weights)
    dW, db = [None] * L, [None] * L
    delta = G
    for i in range(L - 1, -1, -1):
        dW[i] = delta.T @ acts[i]
        db[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * (pre[i - 1] > 0)
    return ParamGrads(weights=dW, biases=db)


def sgd_step(model, grads, lr):
    for w, gw in zip(model.weights, grads.weights):
        w -= lr * gw
    for b, gb in zip(model.biases, grads.biases):
        b -= lr * gb


@dataclass
class LogitMeanStats:
    runs: int
    per_run_means: np.ndarray
    grand_mean: float
    std_error: float

    @classmethod
    def from_means(cls, means):
        means = np.asarray(means, dtype=np.float64)
        n = means.shape[0]
        sd = float(means.std(ddof=1)) if n > 1 else 0.0
        return cls(runs=n, per_run_means=means, grand_mean=math.fsum(means) / n, std_error=sd / math.sqrt(n))

    def within_sigma(self, k=4.0):
        return abs(self.grand_mean) <= k * self.std_error


def run_logit_mean(layer_dims, scheme, run, probe_batch):
    """Mean logit over the probe batch for one freshly initialised model."""
    model = init_model(layer_dims, replace(scheme, seed=derive_seed(scheme.seed, run)))
    return float(forward(model, probe_batch).mean())


def logit_mean_statistics(layer_dims, scheme, runs, probe_batch):
    if runs < 100:
        raise InvalidInputError(f"need at least 100 runs, got {runs}")
    means = [run_logit_mean(layer_dims, scheme, r, probe_batch) for r in range(runs)]
    return LogitMeanStats.from_means(means)


@dataclass
class TrajectoryRecord:
    step_index: int
    logits_mean_s: float
    logits_mean_t: float = math.nan
    param_distance: float = math.nan
    grad_gap: float = math.nan


@dataclass(frozen=True)
class LogitField:
    """Built-in gradient field on free logits; callable like any ``grad_fn``.

    ``kind`` is ``"kd"`` (scaled KD towards teacher logits ``target`` at
    temperature ``T``), ``"ce"`` (cross-entropy towards labels ``target``) or
    ``"lm"`` (logits matching towards ``target``).
    """

    kind: str
    target: np.ndarray = field(repr=False)
    T: float = 1.0

    def __call__(self, z):
        K = self.target.shape[0]
        if self.kind == "kd":
            return kernels.kd_grad(self.target, np.asarray(z, dtype=np.float64), self.T)
        if self.kind == "ce":
            return grad_ce(self.target, z)
        return (np.asarray(z, dtype=np.float64) - self.target) / K

    @property
    def teacher_mean(self):
        return math.nan if self.kind == "ce" else mean(self.target)


def kd_field(z_t, T):
    return LogitField("kd", as_vector(z_t, "z_t").astype(np.float64), as_temperature(T))


def ce_field(y):
    return LogitField("ce", as_labels(y).astype(np.float64))


def lm_field(z_t):
    return LogitField("lm", as_vector(z_t, "z_t").astype(np.float64))


_KERNEL_KINDS = {"kd": kernels.FIELD_KD, "ce": kernels.FIELD_CE, "lm": kernels.FIELD_LM}


def direct_logit_descent(z0, target_grad_fn, steps, lr):
    """Gradient descent treating the logits themselves as the parameters.

    Fields built with :func:`kd_field`, :func:`ce_field` or :func:`lm_field`
    run in the compiled kernel; any other callable runs in a Python loop.
    Returns ``steps + 1`` records (the initial point included).
    """
    z = as_vector(z0, "z0").astype(np.float64)
    if steps < 1:
        raise InvalidInputError("steps must be >= 1")
    if not lr > 0:
        raise InvalidInputError("lr must be positive")
    if isinstance(target_grad_fn, LogitField):
        f = target_grad_fn
        if f.target.shape != z.shape:
            raise DimensionMismatchError("field target and z0 differ in K")
        _, means, diverged_at = kernels.descend(
            z, _KERNEL_KINDS[f.kind], f.target, float(f.T), int(steps), float(lr), DIVERGENCE_CAP
        )
        if diverged_at >= 0:
            raise DivergenceError(f"logits exceeded {DIVERGENCE_CAP:g} at step {diverged_at}")
        t_mean = f.teacher_mean
        return [TrajectoryRecord(k, float(m), t_mean) for k, m in enumerate(means)]

    records = [TrajectoryRecord(0, mean(z))]
    for k in range(1, steps + 1):
        z = z - lr * np.asarray(target_grad_fn(z), dtype=np.float64)
        if np.abs(z).max() > DIVERGENCE_CAP:
            raise DivergenceError(f"logits exceeded {DIVERGENCE_CAP:g} at step {k}")
        records.append(TrajectoryRecord(k, mean(z)))
    return records


def kd_rows(Zt, Zs, T):
    return kernels.kd_grad_rows(np.ascontiguousarray(Zt), np.ascontiguousarray(Zs), T)


def limit_rows(Zt, Zs):
    return np.array([limit_gradient(zt, zs) for zt, zs in zip(Zt, Zs)])


def _max_abs_diff(a, b):
    return float(np.abs(a.flat() - b.flat()).max())


def train_compare(teacher, student_init, data, T, steps, lr, grad_a=None, grad_b=None):
    """Train two clones of ``student_init`` against a fixed teacher.

    Student A follows ``grad_a`` (default: the scaled KD gradient at ``T``),
    student B follows ``grad_b`` (default: the mean-centred limit gradient).
    Both map ``(teacher_logits, student_logits)`` rows to logit gradients,
    averaged over the batch and back-propagated. ``data`` is a list of
    ``(X, Y)`` batches used cyclically; labels are ignored here.

    Record ``k`` holds the parameter distance after ``k`` updates and the
    gradient gap evaluated at that point.
    """
    T = as_temperature(T)
    if teacher.layer_dims[0] != student_init.layer_dims[0] or teacher.n_classes != student_init.n_classes:
        raise DimensionMismatchError("teacher and student must share input size and K")
    if not data:
        raise InvalidInputError("data must contain at least one batch")
    grad_a = grad_a or (lambda Zt, Zs: kd_rows(Zt, Zs, T))
    grad_b = grad_b or limit_rows
    a = student_init.copy()
    b = student_init.copy()
    teacher_logits = [forward(teacher, X) for X, _ in data]
    records = []
    for k in range(steps + 1):
        idx = k % len(data)
        X = data[idx][0]
        Zt = teacher_logits[idx]
        n = X.shape[0]
        Za = forward(a, X)
        Zb = forward(b, X)
        if max(np.abs(Za).max(), np.abs(Zb).max()) > DIVERGENCE_CAP:
            raise DivergenceError(f"student logits exceeded {DIVERGENCE_CAP:g} at step {k}")
        ga = backward(a, X, grad_a(Zt, Za) / n)
        gb = backward(b, X, grad_b(Zt, Zb) / n)
        records.append(
            TrajectoryRecord(
                step_index=k,
                logits_mean_s=float(Za.mean()),
                logits_mean_t=float(Zt.mean()),
                param_distance=_max_abs_diff(a, b),
                grad_gap=_max_abs_diff(ga, gb),
            )
        )
        if k < steps:
            sgd_step(a, ga, lr)
            sgd_step(b, gb, lr)
    return records


def pretrain_teacher(model, data, steps, lr):
    """Short cross-entropy pre-training; returns a trained copy."""
    teacher = model.copy()
    for k in range(steps):
        X, Y = data[k % len(data)]
        Z = forward(teacher, X)
        G = np.array([grad_ce(y, z) for y, z in zip(Y, Z)]) / X.shape[0]
        sgd_step(teacher, backward(teacher, X, G), lr)
    return teacher
