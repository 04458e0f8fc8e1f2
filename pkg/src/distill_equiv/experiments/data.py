"""Synthetic Gaussian-blob classification data."""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from ..numerics import derive_seed, make_rng


@dataclass
class SyntheticDataset:
    inputs: np.ndarray  # (n, d_0), class-major order
    labels: np.ndarray  # (n, K) one-hot
    class_means: np.ndarray  # (K, d_0)
    spread: float

    @property
    def targets(self):
        return self.labels.argmax(axis=1)

    def batches(self, batch_size, seed=None):
        """Split into ``(X, Y)`` batches, optionally after a seeded shuffle."""
        n = self.inputs.shape[0]
        order = np.arange(n) if seed is None else make_rng(seed).permutation(n)
        return [
            (self.inputs[order[i : i + batch_size]], self.labels[order[i : i + batch_size]])
            for i in range(0, n, batch_size)
        ]


def generate_dataset(K, d_0, n_per_class, spread, seed):
    """Isotropic Gaussian blobs with class means on a sphere of radius ``3*spread``."""
    if K < 2 or d_0 < 1 or n_per_class < 1:
        raise InvalidInputError(f"need K >= 2, d_0 >= 1, n_per_class >= 1; got {K}, {d_0}, {n_per_class}")
    if not (math.isfinite(spread) and spread >= 0):
        raise InvalidInputError(f"spread must be finite and >= 0, got {spread}")
    rng = make_rng(seed)
    directions = rng.normal(size=(K, d_0))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    means = 3.0 * spread * directions
    noise = rng.normal(size=(K, n_per_class, d_0)) * spread
    inputs = (means[:, None, :] + noise).reshape(K * n_per_class, d_0)
    labels = np.repeat(np.eye(K), n_per_class, axis=0)
    return SyntheticDataset(inputs=inputs, labels=labels, class_means=means, spread=float(spread))


PROBE_STREAM = 0x9E0BE
PROBE_SIZE = 64


def probe_batch(K, d_0, seed, size=PROBE_SIZE):
    """Fixed probe inputs for logit statistics, from a dedicated seed stream."""
    probe_seed = derive_seed(seed, PROBE_STREAM)
    ds = generate_dataset(K, d_0, math.ceil(size / K), 1.0, probe_seed)
    idx = make_rng(derive_seed(probe_seed, 1)).permutation(ds.inputs.shape[0])[:size]
    return ds.inputs[np.sort(idx)]
