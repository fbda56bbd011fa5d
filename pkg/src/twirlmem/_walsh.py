"""Fast Walsh-Hadamard transform along one axis (unnormalized, natural ordering)."""
import numpy as np


def fwht(a, axis=-1):
    """Return ``H^{(x)n} a`` along ``axis`` where ``H = [[1, 1], [1, -1]]``.

    Entry ``k`` of the output is ``sum_j (-1)^{popcount(j & k)} a[j]``, so
    index bits and mask bits pair up directly. Runs in ``O(N log N)``.
    """
    a = np.moveaxis(np.asarray(a), axis, -1)
    shape = a.shape
    size = shape[-1]
    if size & (size - 1):
        raise ValueError(f"axis length {size} is not a power of two")
    x = a.reshape(-1, size)
    x = x.astype(np.result_type(x.dtype, np.float64), copy=True)
    h = 1
    while h < size:
        x = x.reshape(-1, size // (2 * h), 2, h)
        u = x[:, :, 0, :]
        v = x[:, :, 1, :]
        x = np.stack((u + v, u - v), axis=2)
        h *= 2
    return np.moveaxis(x.reshape(shape), -1, axis)


def parity_signs(mask, n):
    """``(-1)^{popcount(k & mask)}`` for every ``k`` in ``range(2**n)``."""
    k = np.arange(2**n, dtype=np.int64)
    return 1.0 - 2.0 * (popcount(k & mask) & 1)


def popcount(x):
    x = np.asarray(x, dtype=np.int64)
    return np.bitwise_count(x).astype(np.int64)
