"""Checking and normalizing factor matrices."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import TERNARY, CyclicBlocks, Field
from .tensor import Dims, TargetTensor, build_target_tensor

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FactorMatrices:
    """U is (n*m) x R, V is (m*p) x R, W is (n*p) x R."""

    dims: Dims
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        rank = None
        for name, rows in (("u", self.dims.u_rows), ("v", self.dims.v_rows), ("w", self.dims.w_rows)):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if arr.ndim == 1 and arr.size == 0:
                arr = arr.reshape(rows, 0)
            if arr.ndim != 2 or arr.shape[0] != rows:
                raise ValueError(f"{name} must have {rows} rows for dims {self.dims}, got shape {arr.shape}")
            if rank is None:
                rank = arr.shape[1]
            elif arr.shape[1] != rank:
                raise ValueError(f"{name} has {arr.shape[1]} columns, expected {rank}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def rank(self) -> int:
        return self.u.shape[1]

    def in_field(self, field: Field = TERNARY) -> bool:
        allowed = np.array(field.values)
        return all(np.isin(m, allowed).all() for m in (self.u, self.v, self.w))

    def columns(self, order) -> "FactorMatrices":
        order = list(order)
        return FactorMatrices(self.dims, self.u[:, order], self.v[:, order], self.w[:, order])

    def __eq__(self, other):
        if not isinstance(other, FactorMatrices):
            return NotImplemented
        return (
            self.dims == other.dims
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.w, other.w)
        )

    def __hash__(self):
        return hash((self.dims, self.u.tobytes(), self.v.tobytes(), self.w.tobytes()))


@dataclass(frozen=True)
class Violation:
    """A tensor entry (1-based) whose trilinear sum is wrong."""

    i: int
    j: int
    k: int
    expected: int
    got: int


def reconstruct(f: FactorMatrices) -> np.ndarray:
    return np.einsum("ir,jr,kr->ijk", f.u, f.v, f.w)


def verify_decomposition(f: FactorMatrices, t: TargetTensor | None = None) -> list[Violation]:
    """All entries where sum_r U[i,r] V[j,r] W[k,r] differs from T[i,j,k]; empty means valid."""
    if t is None:
        t = build_target_tensor(f.dims)
    if t.dims != f.dims:
        raise ValueError(f"factor dims {f.dims} do not match tensor dims {t.dims}")
    got = reconstruct(f)
    expected = t.entries.astype(np.int64)
    bad = np.argwhere(got != expected)
    return [Violation(int(i) + 1, int(j) + 1, int(k) + 1, int(expected[i, j, k]), int(got[i, j, k])) for i, j, k in bad]


def randomized_product_check(
    f: FactorMatrices, trials: int = 100, bound: int = 10, seed: int | None = 0
) -> tuple[np.ndarray, np.ndarray] | None:
    """Run the algorithm encoded by ``f`` on random integer matrices.

    Returns None when every trial matches the naive product, otherwise the first
    failing pair (A, B).
    """
    n, m, p = f.dims.n, f.dims.m, f.dims.p
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        a = rng.integers(-bound, bound + 1, size=(n, m), dtype=np.int64)
        b = rng.integers(-bound, bound + 1, size=(m, p), dtype=np.int64)
        terms = (f.u.T @ a.reshape(-1)) * (f.v.T @ b.reshape(-1))
        c = f.w @ terms
        if not np.array_equal(c, (a @ b).reshape(-1)):
            return a, b
    return None


def _first_nonzero(col: np.ndarray) -> int:
    nz = np.flatnonzero(col)
    return int(col[nz[0]]) if nz.size else 0


def _key(values) -> tuple[int, ...]:
    return tuple(int(x) for x in values)


def canonicalize(f: FactorMatrices) -> FactorMatrices:
    """Representative of ``f`` under column permutations and sign flips.

    Each column is flipped on (U, V) so that the first nonzero of its U part is
    -1, then on (W, V) so that the first nonzero of its W part is -1; columns are
    then sorted by the key [u; v; w] with -1 < 0 < 1.
    """
    u, v, w = f.u.copy(), f.v.copy(), f.w.copy()
    for r in range(f.rank):
        if _first_nonzero(u[:, r]) > 0:
            u[:, r] *= -1
            v[:, r] *= -1
        if _first_nonzero(w[:, r]) > 0:
            w[:, r] *= -1
            v[:, r] *= -1
    keys = [_key(np.concatenate([u[:, r], v[:, r], w[:, r]])) for r in range(f.rank)]
    order = sorted(range(f.rank), key=keys.__getitem__)
    uv = [_key(np.concatenate([u[:, r], v[:, r]])) for r in order]
    if len(set(uv)) < len(uv):
        log.warning("canonical form has repeated [u;v] columns; it is not lex-strict")
    return FactorMatrices(f.dims, u[:, order], v[:, order], w[:, order])


def cyclic_blocks(f: FactorMatrices, s: int, t: int) -> CyclicBlocks:
    """Slice A, B, C, D out of U in the layout the cyclic model assembles."""
    if not f.dims.is_square:
        raise ValueError(f"cyclic structure needs square dims, got {f.dims}")
    if s < 0 or t < 0 or s + 3 * t != f.rank:
        raise ValueError(f"s + 3t = {s + 3 * t} does not match rank {f.rank}")
    u = f.u
    return CyclicBlocks(u[:, :s], u[:, s : s + t], u[:, s + t : s + 2 * t], u[:, s + 2 * t :])


def check_cyclic(f: FactorMatrices, s: int, t: int) -> bool:
    """True iff U = [A B C D], V = [A D B C], W = P [A C D B] hold column for column."""
    blocks = cyclic_blocks(f, s, t)
    u, v, w = blocks.assemble()
    return np.array_equal(u, f.u) and np.array_equal(v, f.v) and np.array_equal(w, f.w)
