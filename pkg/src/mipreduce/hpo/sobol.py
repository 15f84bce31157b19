"""Unscrambled Sobol points from Joe-Kuo direction numbers (Gray-code order)."""
from __future__ import annotations

import numpy as np

BITS = 30

# (degree s, coefficient a, initial m values) for dimensions 2, 3, ...
# Dimension 1 is the van der Corput sequence (all m = 1).
_DIRECTIONS = (
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
    (5, 4, (1, 1, 5, 5, 5)),
    (5, 7, (1, 1, 7, 11, 19)),
    (5, 11, (1, 1, 5, 1, 1)),
    (5, 13, (1, 1, 1, 3, 11)),
    (5, 14, (1, 3, 5, 5, 31)),
    (6, 1, (1, 3, 3, 9, 7, 49)),
    (6, 13, (1, 1, 1, 15, 21, 21)),
    (6, 16, (1, 3, 1, 13, 27, 49)),
    (6, 19, (1, 1, 1, 15, 7, 5)),
    (6, 22, (1, 3, 1, 15, 13, 25)),
    (6, 25, (1, 1, 5, 5, 19, 61)),
    (7, 1, (1, 3, 7, 11, 23, 15, 103)),
    (7, 4, (1, 3, 7, 13, 13, 15, 69)),
)

MAX_DIM = len(_DIRECTIONS) + 1


class SobolDimensionError(ValueError):
    pass


def _direction_integers(dim_index: int) -> np.ndarray:
    """v_k as integers scaled by 2**BITS for one dimension (0-based index)."""
    if dim_index == 0:
        m = [1] * BITS
    else:
        s, a, m0 = _DIRECTIONS[dim_index - 1]
        m = list(m0)
        for k in range(s, BITS):
            new = m[k - s] ^ (m[k - s] << s)
            for i in range(1, s):
                bit = (a >> (s - 1 - i)) & 1
                if bit:
                    new ^= m[k - i] << i
            m.append(new)
    return np.array([m[k] << (BITS - 1 - k) for k in range(BITS)], dtype=np.int64)


def sobol_points(dim: int, count: int, skip: int = 0) -> np.ndarray:
    """Points ``skip+1 .. skip+count`` of the sequence (the all-zero point 0 is dropped).

    Returns an array of shape ``(count, dim)`` in [0, 1).
    """
    if dim < 1:
        raise SobolDimensionError("dimension must be at least 1")
    if dim > MAX_DIM:
        raise SobolDimensionError(f"direction numbers are shipped for up to {MAX_DIM} dimensions")
    if count < 0 or skip < 0:
        raise ValueError("count and skip must be non-negative")
    total = skip + count + 1
    if total >= 2 ** BITS:
        raise ValueError("too many points requested")
    V = np.stack([_direction_integers(d) for d in range(dim)])  # dim x BITS
    x = np.zeros(dim, dtype=np.int64)
    out = np.empty((count, dim))
    for n in range(1, total):
        c = ((n - 1) ^ n).bit_length() - 1  # rightmost zero bit of n - 1
        x ^= V[:, c]
        if n > skip:
            out[n - skip - 1] = x
    return out / float(2 ** BITS)
