"""Synthetic sample sets for tests that do not need a real order stream."""

import numpy as np

from lobmix.features import SampleSet


def random_samples(n, m, seed=0, normalized=True, target_scale=3.0):
    rng = np.random.default_rng(seed)
    temporal = np.empty((n, m, 5))
    temporal[..., 0] = rng.normal(size=(n, m))
    if not normalized:
        temporal[..., 0] = np.abs(temporal[..., 0]) * 100.0
    temporal[..., 1] = rng.normal(size=(n, m))
    temporal[..., 2] = rng.integers(1, 4, size=(n, m))
    temporal[..., 3] = rng.integers(1, 3, size=(n, m))
    temporal[..., 4] = rng.normal(size=(n, m))
    masked = rng.random((n, m - 1)) < 0.4
    ar = np.where(masked, 0.0, rng.normal(size=(n, m - 1)))
    return SampleSet(
        temporal=temporal,
        autoregressive=ar,
        ar_masked=masked,
        hour=rng.integers(0, 24, size=n),
        pair=rng.integers(1, 3, size=n),
        target=np.round(rng.normal(0, target_scale, size=n)).astype(np.int64),
        anchor_ts=np.sort(rng.integers(0, 10**9, size=n)),
        price=np.full(n, 100.0),
        anchor_index=np.arange(n, dtype=np.int64),
        normalized=normalized,
    )


def fd_floor(loss_value, h, tol):
    """Gradient magnitude below which central-difference roundoff exceeds ``tol``.

    Roundoff in (L(x+h) - L(x-h)) / 2h is about eps * |L| / h.
    """
    return np.finfo(float).eps * abs(loss_value) / (h * tol)


def max_relative_error(analytic, numeric, floor=0.0):
    """Largest |a - n| / max(|a|, |n|, floor)."""
    a = np.asarray(analytic, float).ravel()
    b = np.asarray(numeric, float).ravel()
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    if not np.any(scale > 0):
        return 0.0
    return float(np.max(np.abs(a - b) / np.where(scale > 0, scale, 1.0)))
