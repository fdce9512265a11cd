"""Truncated sums, truncated means and truncated inner products.

The single-vector functions sort once (stable, so tied entries keep index
order), sum with correct rounding, and are the reference definitions.  The ``*_rows`` variants operate on
2-d batches through the selection kernels in :mod:`l0robust.kernels`.
"""
import math

import numpy as np

from . import kernels


def as_real_vec(x, name="x"):
    """Validate ``x`` as a finite, nonempty 1-d float array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return arr


def _check_k(k, d):
    if int(k) != k or k < 0:
        raise ValueError(f"truncation level must be a nonnegative integer, got {k!r}")
    k = int(k)
    if 2 * k >= d:
        raise ValueError(f"truncation level k={k} needs 2k < d, got d={d}")
    return k


def truncation_order(x, k):
    """Split the indices of ``x`` into (bottom k, kept, top k).

    Ties are resolved by a stable sort on the original index.
    """
    x = as_real_vec(x)
    k = _check_k(k, x.size)
    order = np.argsort(x, kind="stable")
    d = x.size
    return order[:k], order[k:d - k], order[d - k:]


def tsum_k(x, k):
    """Sum of ``x`` after removing its ``k`` smallest and ``k`` largest entries.

    >>> tsum_k([1, 1, 2, 3, 4, 5], 1)
    10.0
    """
    x = as_real_vec(x)
    k = _check_k(k, x.size)
    s = np.sort(x, kind="stable")
    return math.fsum(s[k:x.size - k])


def tmean_k(x, k):
    """Truncated mean: ``tsum_k(x, k) / (len(x) - 2k)``."""
    x = as_real_vec(x)
    k = _check_k(k, x.size)
    return tsum_k(x, k) / (x.size - 2 * k)


def trunc_inner_product(w, x, k):
    """k-truncated inner product: ``tsum_k(w * x, k)``.

    For ``k = 0`` this is the ordinary inner product.
    """
    w = as_real_vec(w, "w")
    x = as_real_vec(x, "x")
    if w.shape != x.shape:
        raise ValueError(f"length mismatch: len(w)={w.size}, len(x)={x.size}")
    return tsum_k(w * x, k)


def tsum_rows(z, k):
    """Row-wise truncated sums of a 2-d array."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    k = _check_k(k, z.shape[1])
    if k == 0:
        return z.sum(axis=1)
    return kernels.partition_sums(z, k, k)[1]


def trunc_inner_product_rows(w, x, k):
    """Row-wise ``<w, x_r>_k`` for a batch ``x`` of shape (n, d)."""
    w = np.asarray(w, dtype=np.float64)
    return tsum_rows(np.asarray(x, dtype=np.float64) * w, k)
