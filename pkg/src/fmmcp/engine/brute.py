"""Exhaustive enumeration oracle.

Deliberately shares nothing with the propagation engine: every assignment of
U, V, W is generated, the Brent equations are evaluated with einsum and the
optional symmetry and valid-inequality conditions are checked straight from
their definitions.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..model import ModelConfig
from ..tensor import Dims, build_target_tensor, valid_pairs
from ..verify import FactorMatrices

MAX_VARS = 16
CHUNK = 1 << 16


class OracleTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class BruteResult:
    count: int
    witness: FactorMatrices | None

    @property
    def sat(self) -> bool:
        return self.count > 0


def _first_nonzero_negative(cols: np.ndarray) -> np.ndarray:
    """cols: (batch, rows, R); True per batch when every column starts with -1 or is zero."""
    nz = cols != 0
    first = np.argmax(nz, axis=1)  # (batch, R)
    lead = np.take_along_axis(cols, first[:, None, :], axis=1)[:, 0, :]
    return np.all(lead <= 0, axis=1)


def _lex_strict(keys: np.ndarray) -> np.ndarray:
    """keys: (batch, L, R); True when column r < column r+1 lexicographically for every r."""
    batch, length, rank = keys.shape
    ok = np.ones(batch, dtype=bool)
    for r in range(rank - 1):
        diff = keys[:, :, r + 1] - keys[:, :, r]
        nz = diff != 0
        has = nz.any(axis=1)
        first = np.argmax(nz, axis=1)
        sign = diff[np.arange(batch), first]
        ok &= has & (sign > 0)
    return ok


def brute_force_solve(dims: Dims, rank: int, config: ModelConfig | None = None) -> BruteResult:
    """Count every ternary (U, V, W) satisfying the Brent equations and the chosen families.

    Only the symmetry and valid-inequality toggles of ``config`` are honoured;
    sparsity and cyclic restrictions are not part of the oracle.
    """
    config = config or ModelConfig()
    if config.sparsity is not None or config.cyclic is not None:
        raise ValueError("the oracle does not model sparsity or cyclic restrictions")
    nu, nv, nw = dims.u_rows, dims.v_rows, dims.w_rows
    n_vars = (nu + nv + nw) * rank
    if n_vars > MAX_VARS:
        raise OracleTooLarge(f"{n_vars} variables exceed the oracle limit of {MAX_VARS}")
    target = build_target_tensor(dims).entries.astype(np.int64)
    if config.use_valid and rank > dims.naive_rank:
        raise ValueError(f"valid inequalities need rank <= {dims.naive_rank}")
    pairs = sorted(valid_pairs(dims))

    total = 3**n_vars
    powers = 3 ** np.arange(n_vars, dtype=np.int64)
    count = 0
    witness = None
    for start in range(0, total, CHUNK):
        idx = np.arange(start, min(start + CHUNK, total), dtype=np.int64)
        x = (idx[:, None] // powers[None, :]) % 3 - 1
        b = idx.size
        u = x[:, : nu * rank].reshape(b, nu, rank)
        v = x[:, nu * rank : (nu + nv) * rank].reshape(b, nv, rank)
        w = x[:, (nu + nv) * rank :].reshape(b, nw, rank)
        got = np.einsum("bir,bjr,bkr->bijk", u, v, w)
        ok = np.all(got == target[None], axis=(1, 2, 3))
        if config.use_symmetry:
            ok &= _first_nonzero_negative(u) & _first_nonzero_negative(w)
            ok &= _lex_strict(np.concatenate([u, v], axis=1))
        if config.use_valid:
            aw = np.abs(w)
            ok &= np.all(aw.sum(axis=1) >= 1, axis=1)
            ok &= np.all(aw.sum(axis=2) >= dims.m, axis=1)
            for k, k2 in combinations(range(nw), 2):
                ok &= np.abs(w[:, k, :] - w[:, k2, :]).sum(axis=1) >= 2
            ok &= np.all(np.abs(u).sum(axis=2) >= 1, axis=1)
            ok &= np.all(np.abs(v).sum(axis=2) >= 1, axis=1)
            for i, j in pairs:
                ok &= np.abs(u[:, i - 1, :] * v[:, j - 1, :]).sum(axis=1) >= 1
        hits = np.flatnonzero(ok)
        if hits.size and witness is None:
            h = hits[0]
            witness = FactorMatrices(dims, u[h], v[h], w[h])
        count += int(hits.size)
    return BruteResult(count, witness)
