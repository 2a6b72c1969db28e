"""Backtracking search over ternary domains.

The heavy lifting happens in :mod:`._kernels`; this module owns the state
arrays, the branching order, limits, and the conversion of a search result
into a verified :class:`SolveOutcome`.
"""

from __future__ import annotations

import enum
import logging
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .. import model as M
from ..verify import FactorMatrices, verify_decomposition
from . import _kernels as K

log = logging.getLogger(__name__)

VALUE_BITS = {-1: 1, 0: 2, 1: 4}
DEFAULT_VALUE_ORDER = (0, -1, 1)
POLL_NODES = 1024


def mask_of(values) -> int:
    mask = 0
    for v in values:
        mask |= VALUE_BITS[int(v)]
    return mask


def values_of(mask: int) -> tuple[int, ...]:
    return tuple(v for v, bit in VALUE_BITS.items() if mask & bit)


@dataclass(frozen=True, eq=False)
class CompiledModel:
    kind: np.ndarray
    rhs: np.ndarray
    ptr: np.ndarray
    args: np.ndarray
    wptr: np.ndarray
    watch: np.ndarray
    init_dom: np.ndarray
    scratch_size: int

    @property
    def n_vars(self) -> int:
        return self.init_dom.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.kind.shape[0]


def compile_model(model: M.ConstraintModel) -> CompiledModel:
    """Flatten the constraint lists into the array form the kernels use (cached)."""
    cached = model.__dict__.get("_compiled")
    if cached is not None:
        return cached
    cons = model.constraints
    kind = np.zeros(len(cons), dtype=np.int64)
    rhs = np.zeros(len(cons), dtype=np.int64)
    ptr = np.zeros(len(cons) + 1, dtype=np.int64)
    flat: list[int] = []
    longest = 1
    watchers: list[set[int]] = [set() for _ in range(model.n_vars)]
    for cid, c in enumerate(cons):
        kind[cid] = int(c.kind)
        rhs[cid] = c.rhs
        if c.kind == M.Kind.BRENT:
            for term in c.args:
                flat.extend(term)
            longest = max(longest, len(c.args))
        elif c.kind == M.Kind.LEX:
            xs, ys = c.args
            flat.extend(xs)
            flat.extend(ys)
        elif c.kind in (M.Kind.COUNT_GE, M.Kind.COUNT_LE):
            for term in c.args:
                if len(term) == 1:
                    flat.extend((term[0], -1))
                elif len(term) == 2:
                    flat.extend(term)
                else:
                    raise ValueError(f"count terms have one or two factors: {term}")
        elif c.kind == M.Kind.DIFF_GE:
            for term in c.args:
                flat.extend(term)
            longest = max(longest, len(c.args))
        elif c.kind == M.Kind.FIRST_NEG:
            flat.extend(c.args)
            longest = max(longest, len(c.args) + 1)
        else:
            raise ValueError(f"unknown constraint kind {c.kind}")
        ptr[cid + 1] = len(flat)
        for v in c.variables:
            watchers[v].add(cid)
    wptr = np.zeros(model.n_vars + 1, dtype=np.int64)
    watch: list[int] = []
    for v, ws in enumerate(watchers):
        watch.extend(sorted(ws))
        wptr[v + 1] = len(watch)
    init = np.full(model.n_vars, mask_of(model.field.values), dtype=np.uint8)
    compiled = CompiledModel(
        kind, rhs, ptr, np.array(flat, dtype=np.int64), wptr, np.array(watch, dtype=np.int64), init, longest + 2
    )
    model.__dict__["_compiled"] = compiled
    return compiled


class DomainState:
    """Domains, trail and propagation queue for one search."""

    def __init__(self, model: M.ConstraintModel):
        self.model = model
        cm = compile_model(model)
        self.cm = cm
        nv, nc = cm.n_vars, cm.n_constraints
        self.dom = cm.init_dom.copy()
        self.tvar = np.zeros(2 * nv + 2, dtype=np.int64)
        self.tdom = np.zeros(2 * nv + 2, dtype=np.uint8)
        self.ctr = np.zeros(K.N_CTR, dtype=np.int64)
        self.queue = np.zeros(max(nc, 1), dtype=np.int64)
        self.inq = np.zeros(max(nc, 1), dtype=np.uint8)
        self.scratch = np.zeros(cm.scratch_size, dtype=np.int64)
        depth = 2 * nv + 2
        self.dvar = np.zeros(depth, dtype=np.int64)
        self.dval = np.zeros(depth, dtype=np.int64)
        self.dtrail = np.zeros(depth, dtype=np.int64)
        self.dright = np.zeros(depth, dtype=np.uint8)
        for c in range(nc):
            K._enqueue(c, self.queue, self.inq, self.ctr)
        self.cweight = np.ones(max(nc, 1), dtype=np.int64)
        self.vweight = np.ones(nv, dtype=np.int64)
        self._levels: list[int] = []

    def domain(self, var: int) -> tuple[int, ...]:
        return values_of(int(self.dom[var]))

    def is_fixed(self, var: int) -> bool:
        return K.POPCNT[self.dom[var]] == 1

    @property
    def all_fixed(self) -> bool:
        return bool(np.all(K.POPCNT[self.dom] == 1))

    def values(self) -> np.ndarray:
        if not self.all_fixed:
            raise ValueError("not every variable is fixed")
        return np.log2(self.dom).astype(np.int64) - 1

    def snapshot(self) -> bytes:
        return self.dom.tobytes()

    @property
    def dirty(self) -> list[int]:
        return [int(c) for c in np.flatnonzero(self.inq)]

    def restrict(self, var: int, values) -> bool:
        """Intersect a domain with ``values``, waking its watchers; False on wipe-out."""
        return bool(K._restrict(var, mask_of(values), -1, self.dom, self.tvar, self.tdom, self.ctr,
                                self.cm.wptr, self.cm.watch, self.queue, self.inq))

    def decide(self, var: int, value: int) -> bool:
        """Open a new level and assign ``var = value``."""
        self._levels.append(int(self.ctr[K.TRAIL]))
        return self.restrict(var, (value,))

    def backtrack(self) -> None:
        """Undo everything since the matching :meth:`decide`."""
        K.undo_to(self._levels.pop(), self.dom, self.tvar, self.tdom, self.ctr)
        self.clear_queue()

    def clear_queue(self) -> None:
        self.inq[:] = 0
        self.ctr[K.QCOUNT] = 0
        self.ctr[K.QHEAD] = 0


@dataclass(frozen=True)
class Conflict:
    constraint: int
    family: str
    label: str


def propagate(state: DomainState, model: M.ConstraintModel | None = None) -> Conflict | None:
    """Run every dirty propagator to a common fixpoint; None at fixpoint."""
    model = model or state.model
    cm = state.cm
    cid = K.propagate(cm.kind, cm.rhs, cm.ptr, cm.args, cm.wptr, cm.watch, state.dom, state.tvar,
                      state.tdom, state.ctr, state.queue, state.inq, state.scratch)
    if cid < 0:
        return None
    c = model.constraints[cid]
    return Conflict(int(cid), c.family, c.label)


@dataclass(frozen=True)
class BranchOrder:
    priority: np.ndarray  # lower is tried first among equal domain sizes
    values: np.ndarray  # (n_vars, 3) value order per variable


HEURISTICS = ("rows", "columns")


def branch_order(model: M.ConstraintModel, seed: int = 0, heuristic: str = "rows") -> BranchOrder:
    """Static tie-break order for the smallest-domain rule.

    ``rows`` (the default) walks the factor matrices row by row, the matrix
    with most rows first (ties: W, U, V), so each Brent equation sees its
    variables fixed early.  ``columns`` ranks by (column, W before U before V,
    row).  Values are tried 0, -1, 1.  A nonzero seed shuffles the rows of each
    matrix and the column order and swaps -1/1 for a random half of the
    variables, changing the trajectory while keeping the overall shape.
    """
    if heuristic not in HEURISTICS:
        raise ValueError(f"unknown heuristic {heuristic!r}; expected one of {HEURISTICS}")
    lay = model.layout
    rows = lay.row.copy()
    cols = lay.column.copy()
    order = np.tile(np.array(DEFAULT_VALUE_ORDER, dtype=np.int64), (model.n_vars, 1))
    if seed:
        rng = np.random.default_rng(seed)
        for mat in (0, 1, 2):
            sel = lay.matrix == mat
            if sel.any():
                n_rows = int(lay.row[sel].max()) + 1
                rows[sel] = rng.permutation(n_rows)[lay.row[sel]]
        if cols.size:
            cols = rng.permutation(int(cols.max()) + 1)[cols]
        flip = rng.random(model.n_vars) < 0.5
        order[flip, 1] = 1
        order[flip, 2] = -1
    if heuristic == "rows":
        heights = np.array([int(lay.row[lay.matrix == mat].max(initial=-1)) + 1 for mat in (0, 1, 2)])
        rank_of = np.empty(3, dtype=np.int64)
        rank_of[np.argsort(-heights, kind="stable")] = np.arange(3)
        keys = np.lexsort((cols, rows, rank_of[lay.matrix]))
    else:
        keys = np.lexsort((rows, lay.matrix, cols))
    prio = np.empty(model.n_vars, dtype=np.int64)
    prio[keys] = np.arange(model.n_vars)
    return BranchOrder(prio, order)


def select_branch(state: DomainState, model: M.ConstraintModel | None = None, seed: int = 0,
                  order: BranchOrder | None = None,
                  heuristic: str = "rows") -> tuple[int, tuple[int, ...]] | None:
    """Variable to branch on next and the order its values will be tried."""
    order = order or branch_order(model or state.model, seed, heuristic)
    v = int(K.select_var(state.dom, order.priority, state.vweight))
    if v < 0:
        return None
    values = tuple(int(x) for x in order.values[v] if VALUE_BITS[int(x)] & state.dom[v])
    return v, values


@dataclass(frozen=True)
class SearchLimits:
    time_limit: float | None = None
    node_limit: int | None = None
    restarts: bool = False
    restart_base: int = 512

    def __post_init__(self):
        if self.time_limit is not None and self.time_limit < 0:
            raise ValueError("time_limit must be non-negative")
        if self.node_limit is not None and self.node_limit < 0:
            raise ValueError("node_limit must be non-negative")
        if self.restart_base < 1:
            raise ValueError("restart_base must be positive")


@dataclass
class SearchStats:
    branches: int = 0
    fails: int = 0
    max_depth: int = 0
    elapsed: float = 0.0
    restarts: int = 0
    propagations: int = 0
    solutions: int = 0

    def to_dict(self) -> dict:
        return {
            "branches": self.branches,
            "fails": self.fails,
            "max_depth": self.max_depth,
            "elapsed": self.elapsed,
            "restarts": self.restarts,
            "propagations": self.propagations,
            "solutions": self.solutions,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SearchStats":
        return cls(**{k: d[k] for k in cls().to_dict() if k in d})


class Status(str, enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


@dataclass
class SolveOutcome:
    status: Status
    stats: SearchStats
    exhaustive: bool
    solution: FactorMatrices | None = None
    seed: int = 0
    reason: str = ""

    @property
    def is_proof(self) -> bool:
        """True only for unsatisfiability of the unrestricted model."""
        return self.status == Status.UNSAT and self.exhaustive

    @property
    def definitive(self) -> bool:
        return self.status != Status.UNKNOWN

    def describe(self) -> str:
        if self.status == Status.SAT:
            return "satisfiable"
        if self.status == Status.UNSAT:
            return "unsatisfiable" if self.exhaustive else "unsatisfiable under restriction"
        return f"unknown ({self.reason})" if self.reason else "unknown"


class CancelFlag:
    """Monotone stop signal shared by concurrent searches; polled at every node."""

    def __init__(self):
        self.array = np.zeros(1, dtype=np.int64)

    def set(self) -> None:
        self.array[0] = 1

    def is_set(self) -> bool:
        return bool(self.array[0])


def luby(i: int) -> int:
    """i-th term (1-based) of the Luby sequence 1 1 2 1 1 2 4 ..."""
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    while True:
        if i == (1 << k) - 1:
            return 1 << (k - 1)
        i -= (1 << (k - 1)) - 1
        k = 1
        while (1 << k) - 1 < i:
            k += 1


def search(
    model: M.ConstraintModel,
    seed: int = 0,
    limits: SearchLimits | None = None,
    cancel: CancelFlag | threading.Event | None = None,
    enumerate_all: bool = False,
    heuristic: str = "rows",
) -> SolveOutcome:
    """Depth-first search with propagation.

    The ``rows`` heuristic also learns conflict weights: every failure bumps
    the variables of the failing constraint, and the smallest-domain rule then
    prefers variables with high weight.  ``columns`` uses the plain rule.

    Returns SAT with a verified solution, UNSAT once the whole tree has been
    refuted, or UNKNOWN on a limit or cancellation.  With ``enumerate_all`` the
    search counts every solution (``stats.solutions``) and ends UNSAT or SAT
    depending on whether any was found; the solution field then holds none.
    """
    limits = limits or SearchLimits()
    if limits.restarts and enumerate_all:
        raise ValueError("restarts cannot be combined with solution enumeration")
    start = time.perf_counter()
    state = DomainState(model)
    cm = state.cm
    order = branch_order(model, seed, heuristic)
    learn = heuristic == "rows"
    flag = cancel if isinstance(cancel, CancelFlag) else CancelFlag()
    external = cancel if isinstance(cancel, threading.Event) else None
    stats = SearchStats()
    restart_index = 1
    rng = np.random.default_rng(seed)

    def restart_budget() -> int:
        return limits.restart_base * luby(restart_index) if limits.restarts else 0

    budget = restart_budget()
    reason = ""
    while True:
        chunk = POLL_NODES
        if limits.node_limit is not None:
            chunk = min(chunk, limits.node_limit - int(state.ctr[K.BRANCHES]))
            if chunk <= 0:
                code, reason = K.CONTINUE, "node limit"
                break
        code = K.run(cm.kind, cm.rhs, cm.ptr, cm.args, cm.wptr, cm.watch, state.dom, state.tvar, state.tdom,
                     state.ctr, state.queue, state.inq, state.scratch, state.dvar, state.dval, state.dtrail,
                     state.dright, order.priority, order.values, state.cweight, state.vweight, learn,
                     chunk, budget, enumerate_all, flag.array)
        if code in (K.SAT, K.UNSAT, K.CANCELLED):
            if code == K.CANCELLED:
                reason = "cancelled"
            break
        if code == K.RESTART:
            K.restart(state.dom, state.tvar, state.tdom, state.ctr, state.dtrail)
            stats.restarts += 1
            restart_index += 1
            budget = restart_budget()
            order = branch_order(model, int(rng.integers(1, 2**31)), heuristic)
        if external is not None and external.is_set():
            code, reason = K.CANCELLED, "cancelled"
            break
        if limits.time_limit is not None and time.perf_counter() - start >= limits.time_limit:
            code, reason = K.CONTINUE, "time limit"
            break

    ctr = state.ctr
    stats.branches = int(ctr[K.BRANCHES])
    stats.fails = int(ctr[K.FAILS])
    stats.max_depth = int(ctr[K.MAX_DEPTH])
    stats.propagations = int(ctr[K.PROPAGATIONS])
    stats.solutions = int(ctr[K.SOLUTIONS])
    stats.elapsed = time.perf_counter() - start

    if code == K.SAT:
        u, v, w = model.factors(state.values())
        solution = FactorMatrices(model.dims, u, v, w)
        bad = verify_decomposition(solution)
        if bad:
            raise RuntimeError(f"engine produced an invalid decomposition ({len(bad)} violations): {bad[:3]}")
        return SolveOutcome(Status.SAT, stats, model.exhaustive, solution, seed)
    if code == K.UNSAT:
        if enumerate_all and stats.solutions:
            return SolveOutcome(Status.SAT, stats, model.exhaustive, None, seed, "enumerated")
        return SolveOutcome(Status.UNSAT, stats, model.exhaustive, None, seed)
    return SolveOutcome(Status.UNKNOWN, stats, model.exhaustive, None, seed, reason)


_warm_lock = threading.Lock()
_warmed = False


def warm_up() -> None:
    """Compile (or load from cache) every kernel on a tiny model, once per process.

    Doing this before threads start keeps concurrent searches from all
    triggering compilation at the same moment.
    """
    global _warmed
    with _warm_lock:
        if _warmed:
            return
        from ..tensor import Dims

        for cfg in (M.ModelConfig(use_symmetry=True, use_valid=True), M.ModelConfig(sparsity=(2, 1))):
            small = M.build_model(Dims(1, 1, 2), 2, cfg)
            for heuristic in HEURISTICS:
                search(small, limits=SearchLimits(node_limit=100), heuristic=heuristic)
        _warmed = True
