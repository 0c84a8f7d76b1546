"""Exact integer arrays: int64 when provably safe, Python ints otherwise."""
from __future__ import annotations

import numpy as np

# headroom below 2**63 kept free for one further addition
SAFE_BITS = 62


def bits(a: np.ndarray) -> int:
    """Bit length of the largest magnitude entry (0 for empty / all-zero)."""
    if a.size == 0:
        return 0
    if a.dtype == object:
        return max((abs(int(v)).bit_length() for v in a.flat), default=0)
    hi = int(a.max())
    lo = int(a.min())
    return max(abs(hi).bit_length(), abs(lo).bit_length())


def to_object(a: np.ndarray) -> np.ndarray:
    if a.dtype == object:
        return a
    return a.astype(object)


def shrink(a: np.ndarray) -> np.ndarray:
    """Return an int64 copy when every entry fits, else ``a`` unchanged."""
    if a.dtype == object and bits(a) < SAFE_BITS:
        return a.astype(np.int64)
    return a


def for_bits(a: np.ndarray, result_bits: int) -> np.ndarray:
    """``a`` in a dtype that can hold intermediate results of ``result_bits`` bits."""
    if result_bits >= SAFE_BITS:
        return to_object(a)
    if a.dtype != object and a.dtype != np.int64:
        return a.astype(np.int64)
    return a


def as_int_array(values) -> np.ndarray:
    """Integer ndarray from a sequence of Python ints (object dtype if needed)."""
    arr = np.array([int(v) for v in values], dtype=object)
    return shrink(arr)


def lshift(a: np.ndarray, s: int) -> np.ndarray:
    if s == 0:
        return a
    if s < 0:
        raise ValueError("negative shift")
    a = for_bits(a, bits(a) + s + 1)
    if a.dtype == object:
        return np.array([int(v) << s for v in a.flat], dtype=object).reshape(a.shape)
    return a << s


def add(a: np.ndarray, b: np.ndarray, sign: int = 1) -> np.ndarray:
    nb = max(bits(a), bits(b)) + 1
    a, b = for_bits(a, nb), for_bits(b, nb)
    if a.dtype != b.dtype:
        a, b = to_object(a), to_object(b)
    return a + b if sign > 0 else a - b


def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    nb = bits(a) + bits(b) + 1
    a, b = for_bits(a, nb), for_bits(b, nb)
    if a.dtype != b.dtype:
        a, b = to_object(a), to_object(b)
    return a * b


def scale(a: np.ndarray, c: int) -> np.ndarray:
    c = int(c)
    nb = bits(a) + abs(c).bit_length() + 1
    a = for_bits(a, nb)
    return a * c


def total(a: np.ndarray, axis=None):
    """Exact sum; Python int when ``axis`` is None."""
    n = a.shape[axis] if axis is not None else a.size
    nb = bits(a) + max(n, 1).bit_length() + 1
    a = for_bits(a, nb)
    s = a.sum(axis=axis)
    if axis is None:
        return int(s)
    return s


def trailing_zeros(a: np.ndarray) -> int | None:
    """Common power of two dividing every entry (None if all zero)."""
    if a.dtype == object:
        tz = None
        for v in a.flat:
            v = int(v)
            if v:
                t = (v & -v).bit_length() - 1
                tz = t if tz is None else min(tz, t)
                if tz == 0:
                    return 0
        return tz
    nz = a[a != 0]
    if nz.size == 0:
        return None
    low = np.bitwise_and(nz, -nz)
    return int(np.min(low)).bit_length() - 1


def rshift_exact(a: np.ndarray, s: int) -> np.ndarray:
    if s == 0:
        return a
    if a.dtype == object:
        return np.array([int(v) >> s for v in a.flat], dtype=object).reshape(a.shape)
    return a >> s
