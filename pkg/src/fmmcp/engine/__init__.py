from .brute import BruteResult, OracleTooLarge, brute_force_solve
from .core import (
    BranchOrder,
    CancelFlag,
    Conflict,
    DomainState,
    SearchLimits,
    SearchStats,
    SolveOutcome,
    Status,
    branch_order,
    compile_model,
    luby,
    propagate,
    search,
    select_branch,
    warm_up,
    HEURISTICS,
)

__all__ = [
    "BranchOrder",
    "BruteResult",
    "CancelFlag",
    "Conflict",
    "DomainState",
    "OracleTooLarge",
    "SearchLimits",
    "SearchStats",
    "SolveOutcome",
    "Status",
    "branch_order",
    "brute_force_solve",
    "compile_model",
    "luby",
    "propagate",
    "search",
    "select_branch",
    "warm_up",
    "HEURISTICS",
]
