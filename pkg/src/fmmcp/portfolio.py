"""Racing seeded searches.

Each seed runs one single-threaded search.  The compiled kernels release the
GIL, so plain threads give real parallelism when cores are available and fair
time-slicing when they are not.  The only shared state is a cancellation flag
and the result list.
"""

from __future__ import annotations

import logging
import math
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .engine import CancelFlag, SearchLimits, SearchStats, SolveOutcome, Status, search, warm_up
from .model import ConstraintModel
from .verify import FactorMatrices

log = logging.getLogger(__name__)

DEFAULT_SEEDS = tuple(range(10))
DEFAULT_WORKERS = 8
DEFAULT_BUDGET = 7200.0
DEFAULT_SHIFT = 1e-4


class Aggregate(NamedTuple):
    geo_mean: float
    median: float
    min: float
    max: float


def aggregate(values, shift: float = DEFAULT_SHIFT) -> Aggregate:
    """Shifted geometric mean, lower median, min and max of non-negative values."""
    vals = sorted(float(v) for v in values)
    if not vals:
        raise ValueError("aggregate needs at least one value")
    if any(v < 0 or math.isnan(v) for v in vals):
        raise ValueError(f"values must be non-negative, got {vals}")
    if shift < 0:
        raise ValueError("shift must be non-negative")
    if vals[0] == vals[-1]:
        geo = vals[0]
    else:
        logs = sum(math.log(v + shift) for v in vals)
        geo = math.exp(logs / len(vals)) - shift
    return Aggregate(geo, vals[(len(vals) - 1) // 2], vals[0], vals[-1])


@dataclass(frozen=True)
class PortfolioPlan:
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    workers: int = DEFAULT_WORKERS
    limits: SearchLimits = field(default_factory=SearchLimits)
    budget: float | None = DEFAULT_BUDGET
    race: bool = True  # stop everything at the first definitive answer
    heuristic: str = "rows"

    def __post_init__(self):
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ValueError("a portfolio needs at least one seed")
        if len(set(seeds)) != len(seeds):
            raise ValueError(f"seeds must be distinct, got {seeds}")
        if any(s < 0 for s in seeds):
            raise ValueError("seeds must be non-negative")
        object.__setattr__(self, "seeds", seeds)
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.budget is not None and self.budget <= 0:
            raise ValueError("budget must be positive")


@dataclass(frozen=True)
class SeedRun:
    seed: int
    status: Status
    stats: SearchStats
    cancelled: bool = False
    reason: str = ""

    @property
    def completed(self) -> bool:
        return self.status != Status.UNKNOWN

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "status": self.status.value,
            "cancelled": self.cancelled,
            "reason": self.reason,
            "stats": self.stats.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SeedRun":
        return cls(int(d["seed"]), Status(d["status"]), SearchStats.from_dict(d["stats"]),
                   bool(d.get("cancelled", False)), d.get("reason", ""))


@dataclass
class PortfolioReport:
    outcome: SolveOutcome
    winner: int | None
    runs: list[SeedRun]
    elapsed: float
    exhaustive: bool
    solutions: dict[int, FactorMatrices] = field(default_factory=dict)

    @property
    def completed(self) -> list[SeedRun]:
        return [r for r in self.runs if r.completed]

    @property
    def time_stats(self) -> Aggregate | None:
        done = self.completed
        return aggregate([r.stats.elapsed for r in done]) if done else None

    @property
    def branch_stats(self) -> Aggregate | None:
        done = self.completed
        return aggregate([r.stats.branches for r in done]) if done else None


def run_portfolio(model: ConstraintModel, plan: PortfolioPlan | None = None) -> PortfolioReport:
    """Search ``model`` with every seed of ``plan``, up to ``plan.workers`` at a time.

    In racing mode the first satisfiable or unsatisfiable answer cancels the
    other searches; seeds that had not started yet are recorded as cancelled.
    Without racing every seed runs to its own limit, which is what benchmark
    tables need.
    """
    plan = plan or PortfolioPlan()
    warm_up()
    start = time.perf_counter()
    deadline = None if plan.budget is None else start + plan.budget
    cancel = CancelFlag()
    lock = threading.Lock()
    runs: dict[int, SeedRun] = {}
    outcomes: dict[int, SolveOutcome] = {}
    winner: list[int] = []

    def one(seed: int) -> None:
        if cancel.is_set():
            runs[seed] = SeedRun(seed, Status.UNKNOWN, SearchStats(), True, "cancelled before start")
            return
        limits = plan.limits
        if deadline is not None:
            left = max(deadline - time.perf_counter(), 0.0)
            cap = left if limits.time_limit is None else min(limits.time_limit, left)
            limits = replace(limits, time_limit=cap)
        out = search(model, seed=seed, limits=limits, cancel=cancel, heuristic=plan.heuristic)
        with lock:
            outcomes[seed] = out
            runs[seed] = SeedRun(seed, out.status, out.stats, out.reason == "cancelled", out.reason)
            if out.definitive and not winner:
                winner.append(seed)
                if plan.race:
                    cancel.set()

    with ThreadPoolExecutor(max_workers=min(plan.workers, len(plan.seeds)), thread_name_prefix="seed") as pool:
        pending = {pool.submit(one, s) for s in plan.seeds}
        while pending:
            timeout = None if deadline is None else max(deadline - time.perf_counter(), 0.0) + 0.05
            done, pending = wait(pending, timeout=timeout, return_when=FIRST_COMPLETED)
            for fut in done:
                if fut.exception() is not None:
                    cancel.set()
                    fut.result()  # re-raise engine errors once peers are told to stop
            if deadline is not None and time.perf_counter() >= deadline and not cancel.is_set():
                log.info("global budget of %.1fs exhausted; cancelling", plan.budget)
                cancel.set()

    elapsed = time.perf_counter() - start
    ordered = [runs[s] for s in plan.seeds]
    if winner:
        best = outcomes[winner[0]]
        for r in ordered:
            if r.completed and r.status != best.status:
                raise RuntimeError(f"seeds disagree: seed {winner[0]} says {best.status.value}, "
                                   f"seed {r.seed} says {r.status.value}")
        found = {s: o.solution for s, o in sorted(outcomes.items()) if o.solution is not None}
        return PortfolioReport(best, winner[0], ordered, elapsed, model.exhaustive, found)
    reasons = sorted({r.reason for r in ordered if r.reason})
    unknown = SolveOutcome(Status.UNKNOWN, SearchStats(elapsed=elapsed), model.exhaustive, None, -1,
                           ", ".join(reasons))
    return PortfolioReport(unknown, None, ordered, elapsed, model.exhaustive)
