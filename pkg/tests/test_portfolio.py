import math

import pytest
from hypothesis import given, strategies as st

from fmmcp.engine import SearchLimits, Status
from fmmcp.model import ModelConfig, build_model
from fmmcp.portfolio import PortfolioPlan, aggregate, run_portfolio
from fmmcp.tensor import Dims
from fmmcp.verify import verify_decomposition


def test_aggregate_formula():
    geo, med, lo, hi = aggregate([2, 8])
    assert geo == pytest.approx(math.sqrt(2.0001 * 8.0001) - 0.0001, abs=1e-12)
    assert (med, lo, hi) == (2, 2, 8)


def test_aggregate_identical_values_exact():
    assert aggregate([5, 5, 5], shift=0.3) == (5, 5, 5, 5)


def test_aggregate_lower_median_and_errors():
    assert aggregate([4, 1, 3, 2]).median == 2
    assert aggregate([7]).geo_mean == 7
    with pytest.raises(ValueError):
        aggregate([])
    with pytest.raises(ValueError):
        aggregate([-1.0])


@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=30))
def test_aggregate_order_properties(values):
    geo, med, lo, hi = aggregate(values)
    assert lo - 1e-9 * max(1, hi) <= geo <= hi + 1e-9 * max(1, hi)
    assert med in values and lo == min(values) and hi == max(values)
    assert sum(v <= med for v in values) >= len(values) / 2


def test_plan_validation():
    with pytest.raises(ValueError):
        PortfolioPlan(seeds=())
    with pytest.raises(ValueError):
        PortfolioPlan(workers=0)
    with pytest.raises(ValueError):
        PortfolioPlan(seeds=(1, 1))
    plan = PortfolioPlan()
    assert plan.seeds == tuple(range(10)) and plan.workers == 8 and plan.budget == 7200


def test_sat_race_has_verified_winner():
    model = build_model(Dims(1, 2, 2), 4)
    rep = run_portfolio(model, PortfolioPlan(seeds=range(6), workers=3, limits=SearchLimits(time_limit=60)))
    assert rep.outcome.status == Status.SAT
    assert verify_decomposition(rep.outcome.solution) == []
    assert rep.winner in range(6) and rep.winner in rep.solutions
    assert 1 <= len(rep.completed) <= 6
    assert [r.seed for r in rep.runs] == list(range(6))


def test_exhaustive_unsat_all_seeds_agree():
    model = build_model(Dims(2, 2, 2), 3, ModelConfig(use_symmetry=True))
    rep = run_portfolio(model, PortfolioPlan(seeds=range(4), workers=2, race=False))
    assert rep.outcome.is_proof
    assert [r.status for r in rep.runs] == [Status.UNSAT] * 4
    assert rep.time_stats is not None and rep.branch_stats.min >= 0


def test_restricted_unsat_is_labelled():
    model = build_model(Dims(1, 1, 2), 2, ModelConfig(sparsity=(1, 1)))
    rep = run_portfolio(model, PortfolioPlan(seeds=range(3), workers=2))
    assert rep.outcome.status == Status.UNSAT and not rep.exhaustive
    assert rep.outcome.describe() == "unsatisfiable under restriction"


def test_serial_runs_are_reproducible():
    model = build_model(Dims(2, 2, 2), 3, ModelConfig(use_symmetry=True))
    plan = PortfolioPlan(seeds=range(3), workers=1, race=False)
    a = [(r.seed, r.status, r.stats.branches) for r in run_portfolio(model, plan).runs]
    b = [(r.seed, r.status, r.stats.branches) for r in run_portfolio(model, plan).runs]
    assert a == b


def test_unknown_when_all_seeds_hit_limits():
    model = build_model(Dims(2, 2, 2), 6)
    rep = run_portfolio(model, PortfolioPlan(seeds=range(3), workers=3, limits=SearchLimits(node_limit=20)))
    assert rep.outcome.status == Status.UNKNOWN and rep.winner is None
    assert rep.time_stats is None and rep.completed == []
    assert "node limit" in rep.outcome.reason


def test_global_budget_cancels():
    model = build_model(Dims(2, 2, 2), 6)
    rep = run_portfolio(model, PortfolioPlan(seeds=range(4), workers=2, budget=0.5))
    assert rep.outcome.status == Status.UNKNOWN
    assert rep.elapsed < 5
    assert any(r.cancelled or r.reason == "time limit" for r in rep.runs)


def test_winner_cancels_peers():
    # one seed finishes quickly; with one worker the rest never start
    model = build_model(Dims(1, 1, 2), 2)
    rep = run_portfolio(model, PortfolioPlan(seeds=range(5), workers=1))
    assert rep.winner == 0
    assert all(r.cancelled for r in rep.runs[1:])
