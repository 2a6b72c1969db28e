"""Matrix-multiplication target tensors.

Entries of A (n x m), B (m x p) and C (n x p) are numbered row-major starting
at 1, so ``a_3`` of a 2 x 2 matrix sits at row 2, column 1.  ``T[i, j, k]`` is 1
exactly when the product ``a_i * b_j`` is one of the summands of ``c_k``.

Public indices are 1-based; the arrays themselves are ordinary 0-based numpy
arrays, so ``tensor.entries[i - 1, j - 1, k - 1]`` holds ``T[i, j, k]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, order=True)
class Dims:
    """Matrix dimensions: A is n x m, B is m x p, C is n x p."""

    n: int
    m: int
    p: int

    def __post_init__(self):
        for name in ("n", "m", "p"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")

    @property
    def u_rows(self) -> int:
        return self.n * self.m

    @property
    def v_rows(self) -> int:
        return self.m * self.p

    @property
    def w_rows(self) -> int:
        return self.n * self.p

    @property
    def naive_rank(self) -> int:
        return self.n * self.m * self.p

    @property
    def is_square(self) -> bool:
        return self.n == self.m == self.p

    def __str__(self):
        return f"({self.n},{self.m},{self.p})"


def flat_index(row: int, col: int, mat_cols: int) -> int:
    """1-based row-major position of entry (row, col) in a matrix with ``mat_cols`` columns."""
    if mat_cols < 1:
        raise ValueError(f"mat_cols must be >= 1, got {mat_cols}")
    if row < 1:
        raise ValueError(f"row must be >= 1, got {row}")
    if not 1 <= col <= mat_cols:
        raise ValueError(f"col must be in 1..{mat_cols}, got {col}")
    return (row - 1) * mat_cols + col


@dataclass(frozen=True)
class TargetTensor:
    dims: Dims
    entries: np.ndarray = field(repr=False, compare=False)

    def __getitem__(self, ijk):
        i, j, k = ijk
        return int(self.entries[i - 1, j - 1, k - 1])

    @property
    def shape(self):
        return self.entries.shape

    def __eq__(self, other):
        if not isinstance(other, TargetTensor):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.dims)


def build_target_tensor(dims: Dims) -> TargetTensor:
    n, m, p = dims.n, dims.m, dims.p
    t = np.zeros((n * m, m * p, n * p), dtype=np.int8)
    for ra in range(1, n + 1):
        for ca in range(1, m + 1):
            for cb in range(1, p + 1):
                i = flat_index(ra, ca, m)
                j = flat_index(ca, cb, p)
                k = flat_index(ra, cb, p)
                t[i - 1, j - 1, k - 1] = 1
    t.setflags(write=False)
    return TargetTensor(dims, t)


def valid_pairs(dims: Dims) -> frozenset[tuple[int, int]]:
    """1-based (i, j) pairs whose product a_i * b_j contributes to some output entry."""
    t = build_target_tensor(dims).entries
    ii, jj = np.nonzero(t.any(axis=2))
    return frozenset((int(i) + 1, int(j) + 1) for i, j in zip(ii, jj))


def transpose_permutation(n: int) -> np.ndarray:
    """0-based row permutation taking C's row-major numbering to that of C transposed.

    The row-major tensor is not itself cyclically symmetric; re-indexing its third
    mode through this permutation gives a tensor with T[i,j,k] = T[j,k,i].
    """
    perm = np.empty(n * n, dtype=np.intp)
    for a in range(n):
        for c in range(n):
            perm[a * n + c] = c * n + a
    return perm


def cyclic_view(tensor: TargetTensor) -> np.ndarray:
    """Square tensor with its output mode indexed by C transposed."""
    if not tensor.dims.is_square:
        raise ValueError(f"cyclic view needs square dims, got {tensor.dims}")
    return tensor.entries[:, :, transpose_permutation(tensor.dims.n)]
