"""Matrix permanents.

``permanent`` is Ryser's inclusion-exclusion formula in the
Nijenhuis-Wilf form, walking subsets of the first n-1 columns in Gray-code
order so each step updates the row sums with one column: 2^(n-1) steps of
O(n) work.  ``permanent_batch`` runs the same walk over a stack of matrices.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np

from .errors import CapacityError, ConfigError

MAX_PERMANENT_SIZE = 24


def _validate(a: np.ndarray) -> int:
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ConfigError(f"permanent needs square matrices, got shape {a.shape}")
    n = a.shape[-1]
    if n > MAX_PERMANENT_SIZE:
        raise CapacityError(f"permanent of size {n} exceeds cap {MAX_PERMANENT_SIZE}")
    return n


def _gray_flips(n: int):
    """Yield (column, sign) for successive Gray-code steps over n-1 columns."""
    for g in range(1, 1 << (n - 1)):
        j = (g & -g).bit_length() - 1
        gray = g ^ (g >> 1)
        yield j, (1 if gray >> j & 1 else -1)


def permanent(matrix) -> complex:
    a = np.asarray(matrix, dtype=np.complex128)
    n = _validate(a)
    if n == 0:
        return 1 + 0j
    if n == 1:
        return complex(a[0, 0])
    x = a[:, -1] - 0.5 * a.sum(axis=1)
    total = np.prod(x)
    sign = -1.0
    for j, s in _gray_flips(n):
        x = x + s * a[:, j]
        total += sign * np.prod(x)
        sign = -sign
    return complex(2 * (-1) ** (n - 1) * total)


def permanent_batch(matrices) -> np.ndarray:
    """Permanents of a (B, n, n) stack."""
    a = np.asarray(matrices, dtype=np.complex128)
    n = _validate(a)
    if n == 0:
        return np.ones(a.shape[0], dtype=np.complex128)
    x = a[:, :, -1] - 0.5 * a.sum(axis=2)
    total = np.prod(x, axis=1)
    sign = -1.0
    for j, s in _gray_flips(n):
        x += s * a[:, :, j]
        total += sign * np.prod(x, axis=1)
        sign = -sign
    return 2 * (-1) ** (n - 1) * total


def permanent_naive(matrix) -> complex:
    """n!-term permutation sum. Reference oracle, keep n small."""
    a = np.asarray(matrix, dtype=np.complex128)
    n = _validate(a)
    if n > 9:
        raise CapacityError("naive permanent limited to n <= 9")
    rows = np.arange(n)
    return complex(sum(np.prod(a[rows, list(p)]) for p in permutations(range(n))))
