"""Round-trip cost engine and exhaustive search, cross-checked against a
direct brute-force enumeration at small scale."""

from itertools import combinations, product

import numpy as np
import pytest

from impactlab import (
    InputError,
    Kernel,
    ParameterError,
    SearchBudgetError,
    Strategy,
    count_round_trips,
    gatheral_frontier,
    search_round_trips,
    strategy_cost,
)


def _brute_force(kernel, lam, psi, max_len, grid):
    """Reference enumeration: slot patterns anchored at slot 1, zero-sum
    volumes off the signed grid, one representative per sign orbit."""
    best, best_strategy, n_seen = 0.0, None, 0
    signed = [float(g) for g in grid] + [-float(g) for g in grid]
    for k in range(2, max_len + 1):
        for tail in combinations(range(2, max_len + 1), k - 1):
            slots = (1,) + tail
            for qs in product(signed, repeat=k):
                if sum(qs) != 0 or qs[0] < 0:
                    continue
                n_seen += 1
                cost = strategy_cost(
                    Strategy(tuple(zip(slots, qs)), max_len), kernel, lam, psi
                ).expected_cost
                if cost < best - 1e-15:
                    best, best_strategy = cost, tuple(zip(slots, qs))
    return best, best_strategy, n_seen


def test_strategy_validation():
    s = Strategy(((1, 2.0), (3, -2.0)), 4)
    assert s.round_trip and s.net_volume == 0.0
    assert not Strategy(((1, 2.0),), 4).round_trip
    with pytest.raises(ParameterError):
        Strategy(((1, 0.0),), 4)
    with pytest.raises(InputError):
        Strategy(((5, 1.0),), 4)
    with pytest.raises(ParameterError):
        Strategy(((2, 1.0), (2, -1.0)), 4)


def test_single_buy_pays_its_own_impact():
    rep = strategy_cost(Strategy(((1, 1.0),), 1), Kernel.permanent(), 1.0, 1.0)
    assert rep.expected_cost == 1.0
    assert rep.exec_prices[0] == 1.0


def test_own_impact_half_charges_half():
    s = Strategy(((1, 2.0),), 1)
    assert strategy_cost(s, Kernel.permanent(), 1.0, 1.0).expected_cost == 4.0
    assert strategy_cost(s, Kernel.permanent(), 1.0, 1.0, own_impact="half").expected_cost == 2.0
    with pytest.raises(ParameterError):
        strategy_cost(s, Kernel.permanent(), 1.0, 1.0, own_impact="none")


def test_nine_buys_one_sell_worked_example():
    # permanent impact, psi=0.5: buys walk the price up 1..9, the sell of 9
    # only concedes sqrt(9)=3, banking 9
    nine = Strategy(tuple((s, 1.0) for s in range(1, 10)) + ((10, -9.0),), 10)
    assert abs(strategy_cost(nine, Kernel.permanent(), 1.0, 0.5).expected_cost + 9.0) < 1e-12
    # linear impact: the same shape strictly loses
    lin = strategy_cost(nine, Kernel.permanent(), 1.0, 1.0).expected_cost
    assert abs(lin - 45.0) < 1e-12
    assert strategy_cost(nine, Kernel.permanent(), 2.0, 1.0).expected_cost == 2 * lin


def test_cost_is_odd_under_mirroring_and_linear_in_lam():
    s = Strategy(((1, 2.0), (3, -1.0), (5, -1.0)), 6)
    k = Kernel.power_law(0.4)
    c = strategy_cost(s, k, 1.3, 0.6).expected_cost
    assert strategy_cost(s.mirrored(), k, 1.3, 0.6).expected_cost == c
    assert abs(strategy_cost(s, k, 2.6, 0.6).expected_cost - 2 * c) < 1e-14


def test_count_round_trips_matches_brute_force():
    _, _, seen = _brute_force(Kernel.permanent(), 1.0, 1.0, 4, (1, 2))
    assert count_round_trips(4, (1, 2)) == seen == 33
    _, _, seen6 = _brute_force(Kernel.permanent(), 1.0, 1.0, 6, (1, 5))
    assert count_round_trips(6, (1, 5)) == seen6 == 396


def test_count_degenerate_grids():
    assert count_round_trips(1, (1, 2)) == 0
    assert count_round_trips(4, ()) == 0
    with pytest.raises(ParameterError):
        count_round_trips(4, (1.5,))


def test_search_matches_brute_force_minimum():
    kern = Kernel.permanent()
    b_cost, b_strat, _ = _brute_force(kern, 1.0, 0.3, 6, (1, 5))
    cost, strat, report = search_round_trips(kern, 1.0, 0.3, 6, (1.0, 5.0))
    assert abs(cost - b_cost) < 1e-12
    assert strat.trades == b_strat
    assert report["evaluated"] == report["candidates"] == 396
    # concave impact lets five unit buys ride ahead of one block sell
    assert abs(b_cost - 5.0 * (5.0**0.3 - 2.0)) < 1e-12


def test_search_returns_empty_strategy_when_no_profit_exists():
    cost, strat, _ = search_round_trips(Kernel.permanent(), 1.0, 1.0, 6, (1.0, 2.0))
    assert cost == 0.0 and strat is None


def test_search_budget_refusal_reports_the_size():
    with pytest.raises(SearchBudgetError) as exc_info:
        search_round_trips(Kernel.permanent(), 1.0, 0.5, 10, (1, 2, 4, 8, 9), budget=100)
    err = exc_info.value
    assert err.count == count_round_trips(10, (1, 2, 4, 8, 9)) == 266_637_232
    assert err.budget == 100
    assert str(err.count) in str(err) and "100" in str(err)


def test_search_guards():
    with pytest.raises(ParameterError):
        search_round_trips(Kernel.permanent(), 1.0, 0.5, 13, (1,))
    with pytest.raises(ParameterError):
        search_round_trips(Kernel.permanent(), -1.0, 0.5, 4, (1,))


def test_frontier_rows_follow_the_diagonal_rule():
    rows = gatheral_frontier([0.0, 0.8], [1.0, 0.3], max_len=6, volume_grid=(1, 5))
    table = {(r["beta"], r["psi"]): r for r in rows}
    assert len(rows) == 4
    assert table[(0.0, 1.0)]["min_cost"] >= 0.0
    assert table[(0.0, 0.3)]["min_cost"] < 0.0  # deep concavity leaks profit
    assert table[(0.8, 1.0)]["min_cost"] >= 0.0
    assert table[(0.8, 0.3)]["candidates"] == 396
    assert table[(0.0, 0.3)]["argmin"] is not None
