"""Constraint model for rank-R decompositions of the multiplication tensor.

Every model is built over a :class:`VarLayout` that says which decision
variable stands behind each entry of U, V and W.  In the plain layout every
entry is its own variable; the cyclic layout maps the entries onto the four
blocks A, B, C, D so that several entries share one variable.  All families are
expressed through the layout, so they work unchanged in both cases.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import combinations
from typing import Sequence

import numpy as np

from .tensor import Dims, build_target_tensor, transpose_permutation, valid_pairs

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Raised for model configurations that cannot be built."""


@dataclass(frozen=True)
class Field:
    values: tuple[int, ...] = (-1, 0, 1)

    def __post_init__(self):
        vals = tuple(sorted(set(int(v) for v in self.values)))
        object.__setattr__(self, "values", vals)
        if 0 not in vals:
            raise ConfigError(f"field must contain 0: {vals}")
        if any(-v not in vals for v in vals):
            raise ConfigError(f"field must be closed under negation: {vals}")

    def __contains__(self, value):
        return value in self.values

    def describe(self) -> str:
        return "{" + ",".join(str(v) for v in self.values) + "}"


TERNARY = Field()


@dataclass(frozen=True)
class ModelConfig:
    use_symmetry: bool = False
    use_valid: bool = False
    sparsity: tuple[int, int] | None = None
    cyclic: tuple[int, int] | None = None
    field: Field = TERNARY
    # lex over the A columns and over the B/C/D column triples; unproven heuristic
    cyclic_lex: bool = False

    @property
    def label(self) -> str:
        """Short method label in the style B, B+S, B+V+S, B+K, B+C."""
        parts = ["B"]
        if self.use_valid:
            parts.append("V")
        if self.use_symmetry:
            parts.append("S")
        if self.sparsity is not None:
            parts.append("K")
        if self.cyclic is not None:
            parts.append("C")
        return "+".join(parts)

    @property
    def exhaustive(self) -> bool:
        return self.sparsity is None and self.cyclic is None


class Kind(enum.IntEnum):
    BRENT = 0  # args: ((x, y, z), ...); sum of products == rhs
    LEX = 1  # args: (xs, ys); xs <lex ys strictly, value order -1 < 0 < 1
    COUNT_GE = 2  # args: ((f1,) or (f1, f2), ...); count of nonzero products >= rhs
    COUNT_LE = 3  # as COUNT_GE with <=
    DIFF_GE = 4  # args: ((a, b), ...); sum |a - b| >= rhs
    FIRST_NEG = 5  # args: (x1, x2, ...); first nonzero entry, if any, is -1


@dataclass(frozen=True)
class Constraint:
    family: str
    kind: Kind
    args: tuple
    rhs: int = 0
    label: str = ""

    @property
    def variables(self) -> tuple[int, ...]:
        if self.kind == Kind.LEX:
            return tuple(self.args[0]) + tuple(self.args[1])
        if self.kind == Kind.FIRST_NEG:
            return tuple(self.args)
        return tuple(v for term in self.args for v in term)

    def satisfied(self, x: Sequence[int]) -> bool:
        """Evaluate on a full assignment ``x`` indexed by variable id."""
        k = self.kind
        if k == Kind.BRENT:
            return sum(x[a] * x[b] * x[c] for a, b, c in self.args) == self.rhs
        if k == Kind.LEX:
            xs = [x[v] for v in self.args[0]]
            ys = [x[v] for v in self.args[1]]
            return xs < ys
        if k in (Kind.COUNT_GE, Kind.COUNT_LE):
            count = sum(1 for term in self.args if all(x[v] != 0 for v in term))
            return count >= self.rhs if k == Kind.COUNT_GE else count <= self.rhs
        if k == Kind.DIFF_GE:
            return sum(abs(x[a] - x[b]) for a, b in self.args) >= self.rhs
        if k == Kind.FIRST_NEG:
            for v in self.args:
                if x[v] != 0:
                    return x[v] < 0
            return True
        raise AssertionError(k)


@dataclass(frozen=True, eq=False)
class VarLayout:
    """Which variable id sits behind each (row, column) entry of U, V and W (0-based)."""

    dims: Dims
    rank: int
    n_vars: int
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    names: tuple[str, ...]
    # branching attributes per variable: column, matrix order (W=0, U=1, V=2), row
    column: np.ndarray
    matrix: np.ndarray
    row: np.ndarray


def plain_layout(dims: Dims, rank: int) -> VarLayout:
    nu, nv, nw = dims.u_rows, dims.v_rows, dims.w_rows
    total = (nu + nv + nw) * rank
    ids = np.arange(total, dtype=np.int64)
    u = ids[: nu * rank].reshape(nu, rank)
    v = ids[nu * rank : (nu + nv) * rank].reshape(nv, rank)
    w = ids[(nu + nv) * rank :].reshape(nw, rank)
    names, column, matrix, row = [], [], [], []
    for mat, order, rows in (("u", 1, nu), ("v", 2, nv), ("w", 0, nw)):
        for i in range(rows):
            for r in range(rank):
                names.append(f"{mat}[{i + 1},{r + 1}]")
                column.append(r)
                matrix.append(order)
                row.append(i)
    return VarLayout(
        dims, rank, total, u, v, w, tuple(names),
        np.array(column, dtype=np.int64), np.array(matrix, dtype=np.int64), np.array(row, dtype=np.int64),
    )


@dataclass(frozen=True)
class CyclicBlocks:
    """Blocks of a cyclic-invariant factorization; each has n*n rows."""

    a_block: np.ndarray
    b_block: np.ndarray
    c_block: np.ndarray
    d_block: np.ndarray

    @property
    def s(self) -> int:
        return self.a_block.shape[1]

    @property
    def t(self) -> int:
        return self.b_block.shape[1]

    def assemble(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (U, V, W) with U = [A B C D], V = [A D B C], W = P [A C D B].

        P re-indexes rows through C transposed, which is what makes the row-major
        multiplication tensor cyclically symmetric.
        """
        a, b, c, d = self.a_block, self.b_block, self.c_block, self.d_block
        perm = transpose_permutation(math.isqrt(a.shape[0]))
        u = np.hstack([a, b, c, d])
        v = np.hstack([a, d, b, c])
        w = np.hstack([a, c, d, b])[perm, :]
        return u, v, w


def cyclic_layout(dims: Dims, s: int, t: int) -> VarLayout:
    """Variable layout for the cyclic parametrization with block widths s, t."""
    if not dims.is_square:
        raise ConfigError(f"cyclic formulation needs n = m = p, got {dims}")
    if s < 0 or t < 0:
        raise ConfigError(f"cyclic block widths must be non-negative, got s={s}, t={t}")
    n2 = dims.n * dims.n
    rank = s + 3 * t
    widths = {"A": s, "B": t, "C": t, "D": t}
    ids: dict[str, np.ndarray] = {}
    names: list[str] = []
    next_id = 0
    for blk in "ABCD":
        width = widths[blk]
        ids[blk] = np.arange(next_id, next_id + n2 * width, dtype=np.int64).reshape(n2, width)
        next_id += n2 * width
        names.extend(f"{blk}[{i + 1},{c + 1}]" for i in range(n2) for c in range(width))
    blocks = CyclicBlocks(ids["A"], ids["B"], ids["C"], ids["D"])
    u, v, w = blocks.assemble()
    column = np.zeros(next_id, dtype=np.int64)
    matrix = np.zeros(next_id, dtype=np.int64)
    row = np.zeros(next_id, dtype=np.int64)
    # each block variable is ranked by its position in U
    for r in range(rank):
        for i in range(n2):
            vid = u[i, r]
            column[vid] = r
            matrix[vid] = 1
            row[vid] = i
    return VarLayout(dims, rank, next_id, u, v, w, tuple(names), column, matrix, row)


def _abs_terms(ids) -> tuple:
    return tuple((int(v),) for v in ids)


def brent_family(dims: Dims, rank: int, layout: VarLayout | None = None) -> list[Constraint]:
    lay = layout or plain_layout(dims, rank)
    t = build_target_tensor(dims).entries
    out = []
    for i in range(dims.u_rows):
        for j in range(dims.v_rows):
            for k in range(dims.w_rows):
                terms = tuple(
                    (int(lay.u[i, r]), int(lay.v[j, r]), int(lay.w[k, r])) for r in range(rank)
                )
                out.append(Constraint("brent", Kind.BRENT, terms, int(t[i, j, k]), f"T[{i + 1},{j + 1},{k + 1}]"))
    return out


def _lex_pair(lay: VarLayout, r: int, q: int, family: str = "lex") -> Constraint:
    xs = tuple(int(x) for x in np.concatenate([lay.u[:, r], lay.v[:, r]]))
    ys = tuple(int(x) for x in np.concatenate([lay.u[:, q], lay.v[:, q]]))
    return Constraint(family, Kind.LEX, (xs, ys), 0, f"[u;v]_{r + 1} < [u;v]_{q + 1}")


def lex_family(dims: Dims, rank: int, layout: VarLayout | None = None) -> list[Constraint]:
    lay = layout or plain_layout(dims, rank)
    return [_lex_pair(lay, r, r + 1) for r in range(rank - 1)]


def cyclic_lex_family(layout: VarLayout, s: int, t: int) -> list[Constraint]:
    # Reordering A columns, or the shared index of the B/C/D blocks, keeps the
    # cyclic structure, so each of those groups can be put in lex order.
    out = [_lex_pair(layout, r, r + 1, "lex") for r in range(s - 1)]
    out += [_lex_pair(layout, s + q, s + q + 1, "lex") for q in range(t - 1)]
    return out


def _first_neg_family(ids: np.ndarray, rank: int, family: str, mat: str) -> list[Constraint]:
    return [
        Constraint(family, Kind.FIRST_NEG, tuple(int(x) for x in ids[:, r]), 0, f"first nonzero of {mat}[:,{r + 1}] is -1")
        for r in range(rank)
    ]


def sign_family_u(dims: Dims, rank: int, layout: VarLayout | None = None) -> list[Constraint]:
    """u[1,r] <= 0 and u[i,r] <= sum_{i'<i} |u[i',r]|, one chain constraint per column."""
    lay = layout or plain_layout(dims, rank)
    return _first_neg_family(lay.u, rank, "sign_u", "u")


def sign_family_w(dims: Dims, rank: int, layout: VarLayout | None = None) -> list[Constraint]:
    lay = layout or plain_layout(dims, rank)
    return _first_neg_family(lay.w, rank, "sign_w", "w")


def _dedupe(term) -> tuple[int, ...]:
    return tuple(dict.fromkeys(int(x) for x in term))


def valid_family(dims: Dims, rank: int, layout: VarLayout | None = None) -> list[Constraint]:
    if rank > dims.naive_rank:
        raise ConfigError(
            f"valid inequality family 'w_col_nonzero' only holds for rank <= n*m*p = {dims.naive_rank}, got rank {rank}"
        )
    lay = layout or plain_layout(dims, rank)
    out = []
    for r in range(rank):
        out.append(Constraint("w_col_nonzero", Kind.COUNT_GE, _abs_terms(lay.w[:, r]), 1, f"sum_k |w[k,{r + 1}]| >= 1"))
    for k in range(dims.w_rows):
        out.append(Constraint("w_row_min", Kind.COUNT_GE, _abs_terms(lay.w[k, :]), dims.m, f"sum_r |w[{k + 1},r]| >= {dims.m}"))
    for k, k2 in combinations(range(dims.w_rows), 2):
        pairs = tuple((int(a), int(b)) for a, b in zip(lay.w[k, :], lay.w[k2, :]))
        out.append(Constraint("w_row_diff", Kind.DIFF_GE, pairs, 2, f"sum_r |w[{k + 1},r] - w[{k2 + 1},r]| >= 2"))
    for i in range(dims.u_rows):
        out.append(Constraint("u_row_nonzero", Kind.COUNT_GE, _abs_terms(lay.u[i, :]), 1, f"sum_r |u[{i + 1},r]| >= 1"))
    for j in range(dims.v_rows):
        out.append(Constraint("v_row_nonzero", Kind.COUNT_GE, _abs_terms(lay.v[j, :]), 1, f"sum_r |v[{j + 1},r]| >= 1"))
    for i, j in sorted(valid_pairs(dims)):
        terms = tuple(_dedupe((lay.u[i - 1, r], lay.v[j - 1, r])) for r in range(rank))
        out.append(Constraint("pair_cover", Kind.COUNT_GE, terms, 1, f"sum_r |u[{i},r] v[{j},r]| >= 1"))
    return out


def sparsity_family(dims: Dims, rank: int, k1: int, k2: int, layout: VarLayout | None = None) -> list[Constraint]:
    if k1 < 1 or k2 < 1:
        raise ConfigError(f"sparsity bounds must be >= 1, got k1={k1}, k2={k2}")
    lay = layout or plain_layout(dims, rank)
    out = []
    for r in range(rank):
        ids = np.concatenate([lay.u[:, r], lay.v[:, r]])
        out.append(Constraint("sparsity_uv", Kind.COUNT_LE, _abs_terms(ids), k1, f"nnz([u;v][:,{r + 1}]) <= {k1}"))
    for k in range(dims.w_rows):
        out.append(Constraint("sparsity_w", Kind.COUNT_LE, _abs_terms(lay.w[k, :]), k2, f"nnz(w[{k + 1},:]) <= {k2}"))
    return out


def cyclic_parametrization(dims: Dims, s: int, t: int, rank: int | None = None) -> VarLayout:
    if rank is not None and s + 3 * t != rank:
        raise ConfigError(f"cyclic widths give rank s + 3t = {s + 3 * t}, expected {rank}")
    return cyclic_layout(dims, s, t)


@dataclass(eq=False)
class ConstraintModel:
    dims: Dims
    rank: int
    config: ModelConfig
    layout: VarLayout
    families: dict[str, list[Constraint]]
    exhaustive: bool
    notes: list[str] = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return self.layout.n_vars

    @cached_property
    def constraints(self) -> list[Constraint]:
        return [c for cs in self.families.values() for c in cs]

    @property
    def family_sizes(self) -> dict[str, int]:
        return {name: len(cs) for name, cs in self.families.items()}

    @property
    def field(self) -> Field:
        return self.config.field

    def factors(self, x: Sequence[int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Expand a variable assignment into (U, V, W)."""
        x = np.asarray(x, dtype=np.int64)
        return x[self.layout.u], x[self.layout.v], x[self.layout.w]

    def satisfied(self, x: Sequence[int]) -> bool:
        return all(c.satisfied(x) for c in self.constraints)

    def describe(self) -> str:
        sizes = ", ".join(f"{k}={v}" for k, v in self.family_sizes.items())
        kind = "exhaustive" if self.exhaustive else "restricted"
        return f"{self.dims} R={self.rank} {self.config.label} vars={self.n_vars} [{sizes}] {kind}"


def build_model(dims: Dims, rank: int, config: ModelConfig | None = None) -> ConstraintModel:
    config = config or ModelConfig()
    if rank < 0:
        raise ConfigError(f"rank must be >= 0, got {rank}")
    if not set(config.field.values) <= {-1, 0, 1}:
        raise ConfigError(f"the search engine supports subsets of {{-1,0,1}} only, got {config.field.describe()}")
    notes: list[str] = []

    if config.cyclic is not None:
        s, t = config.cyclic
        if not dims.is_square:
            raise ConfigError(f"cyclic formulation needs n = m = p, got {dims}")
        layout = cyclic_parametrization(dims, s, t, rank)
    else:
        layout = plain_layout(dims, rank)

    families: dict[str, list[Constraint]] = {"brent": brent_family(dims, rank, layout)}

    if config.use_symmetry:
        if config.cyclic is None:
            families["lex"] = lex_family(dims, rank, layout)
            families["sign_u"] = sign_family_u(dims, rank, layout)
            families["sign_w"] = sign_family_w(dims, rank, layout)
        else:
            notes.append("symmetry families disabled under the cyclic formulation")
            config = replace(config, use_symmetry=False)
    if config.cyclic is not None and config.cyclic_lex:
        families["lex"] = cyclic_lex_family(layout, *config.cyclic)

    if config.use_valid:
        for c in valid_family(dims, rank, layout):
            families.setdefault(c.family, []).append(c)

    if config.sparsity is not None:
        k1, k2 = config.sparsity
        k1_max, k2_max = dims.u_rows + dims.v_rows, rank
        if k1 > k1_max:
            notes.append(f"k1={k1} clamped to {k1_max}")
            k1 = k1_max
        if k2 > k2_max:
            notes.append(f"k2={k2} clamped to {k2_max}")
            k2 = k2_max
        for c in sparsity_family(dims, rank, k1, k2, layout):
            families.setdefault(c.family, []).append(c)

    for note in notes:
        log.info("%s R=%d: %s", dims, rank, note)
    return ConstraintModel(dims, rank, config, layout, families, config.exhaustive, notes)
