# tests/test_discrete_oracle.py - Integer-unit backward induction, table policies and best responses

from fractions import Fraction

import numpy as np
import pytest

from errors import GameValidationError, OracleCapacityError, GranularityError
from game_core import ALL_MECHANISMS, FIRST_PRICE_POORMAN, FIRST_PRICE_RICHMAN, build_game
from discrete_oracle import (DiscreteState, discrete_minimax, best_response_search, post_budgets,
                             FixedBidPolicy, TablePolicy)
from sim_engine import MAX_SIDE, MIN_SIDE, run_play, mp_payoff_estimate


def test_fair_bowtie_bracket(bowtie_game):
    solution = discrete_minimax(bowtie_game, FIRST_PRICE_POORMAN, 20, 20, 40)
    lower, upper = solution.root_bracket('v1')
    assert lower <= upper
    assert 0.4 <= lower and upper <= 0.6


def test_single_round_with_all_the_money(bowtie_game):
    solution = discrete_minimax(bowtie_game, FIRST_PRICE_POORMAN, 1, 0, 1)
    assert solution.root_bracket('v0') == (1.0, 1.0)
    bid, move = solution.max_policy().units_decision(DiscreteState('v0', 1, 0, 1))
    assert (bid, move) == (1, 'v1')


@pytest.mark.parametrize('mech', ALL_MECHANISMS, ids=lambda m: m.name)
def test_broke_max_loses_every_round(bowtie_game, mech):
    solution = discrete_minimax(bowtie_game, mech, 0, 5, 6)
    if mech.is_poorman:
        assert solution.root_bracket('v1') == (0.0, 0.0)
    else:
        # Richman winners pay Max, so only the first round is certain
        assert solution.bracket(DiscreteState('v1', 0, 5, 1)) == (0.0, 0.0)


def test_min_controlled_cycle_average(three_cycle):
    solution = discrete_minimax(three_cycle, FIRST_PRICE_POORMAN, 0, 3, 3)
    # a -> b -> c -> a is the only cycle: weights -1, 1/2, 2 average to 1/2
    assert solution.root_bracket('a') == pytest.approx((0.5, 0.5))


def test_lower_never_exceeds_upper(bowtie_game):
    for mech in ALL_MECHANISMS:
        solution = discrete_minimax(bowtie_game, mech, 4, 3, 5)
        for rounds_left in range(1, 6):
            assert all(lo <= hi for _, lo, hi in solution.iter_states(rounds_left))


@pytest.mark.parametrize('mech', ALL_MECHANISMS, ids=lambda m: m.name)
def test_exhaustive_mode_agrees(bowtie_game, mech):
    fast = discrete_minimax(bowtie_game, mech, 3, 2, 3)
    slow = discrete_minimax(bowtie_game, mech, 3, 2, 3, exhaustive=True)
    for vid in bowtie_game.ids:
        assert fast.root_bracket(vid) == pytest.approx(slow.root_bracket(vid))


def test_poorman_bracket_tracks_budget_ratio(bowtie_game):
    errors = []
    for units in (5, 10, 20):
        lower, upper = discrete_minimax(bowtie_game, FIRST_PRICE_POORMAN, units, units, 2 * units).root_bracket()
        errors.append(abs(0.5 * (lower + upper) - 0.5))
    violations = [later - earlier for earlier, later in zip(errors, errors[1:]) if later > earlier]
    assert len(violations) <= 1
    assert all(v <= 0.02 for v in violations)


def test_uneven_budgets_favour_min(bowtie_game):
    lower, upper = discrete_minimax(bowtie_game, FIRST_PRICE_POORMAN, 20, 40, 40).root_bracket()
    assert upper <= 1 / 3 + 0.1
    assert lower <= upper


def test_caps(bowtie_game):
    with pytest.raises(OracleCapacityError):
        discrete_minimax(bowtie_game, FIRST_PRICE_POORMAN, 65, 1, 4)
    with pytest.raises(OracleCapacityError):
        discrete_minimax(bowtie_game, FIRST_PRICE_POORMAN, 1, 1, 65)
    big = build_game({'objective': 'mean-payoff',
                      'vertices': [{'id': f"v{i}"} for i in range(7)],
                      'edges': [[f"v{i}", f"v{(i + 1) % 7}"] for i in range(7)]})
    with pytest.raises(OracleCapacityError):
        discrete_minimax(big, FIRST_PRICE_POORMAN, 1, 1, 1)
    with pytest.raises(GameValidationError):
        discrete_minimax(bowtie_game, FIRST_PRICE_POORMAN, 1, 1, 0)


def test_post_budgets():
    assert post_budgets(FIRST_PRICE_RICHMAN, 5, 5, 2, 1, True) == (3, 7)
    a, b = post_budgets(FIRST_PRICE_POORMAN, np.array([5]), np.array([5]), 2, 1, np.array([False]))
    assert (int(a[0]), int(b[0])) == (5, 4)


def test_fixed_zero_max_gives_min_cycle_average(bowtie_game):
    fixed = FixedBidPolicy(bowtie_game, MAX_SIDE, 0)
    response = best_response_search(bowtie_game, FIRST_PRICE_POORMAN, fixed, MIN_SIDE, 4, 4, 6)
    assert response.value == 0.0
    assert response.values['v0'] == 0.0


@pytest.mark.parametrize('mech', ALL_MECHANISMS, ids=lambda m: m.name)
def test_best_response_to_optimal_policies_is_exact(bowtie_game, mech):
    solution = discrete_minimax(bowtie_game, mech, 6, 4, 8)
    against_max = best_response_search(bowtie_game, mech, solution.max_policy(), MIN_SIDE, 6, 4, 8, 'v1')
    against_min = best_response_search(bowtie_game, mech, solution.min_policy(), MAX_SIDE, 6, 4, 8, 'v1')
    lower, upper = solution.root_bracket('v1')
    assert against_max.value == lower
    assert against_min.value == upper


def test_best_response_against_min_table(bowtie_game):
    solution = discrete_minimax(bowtie_game, FIRST_PRICE_POORMAN, 20, 40, 40)
    response = best_response_search(bowtie_game, FIRST_PRICE_POORMAN, solution.min_policy(), MAX_SIDE,
                                    20, 40, 40)
    assert response.value <= 1 / 3 + 0.1


def test_granularity_mismatch(bowtie_game):
    solution = discrete_minimax(bowtie_game, FIRST_PRICE_POORMAN, 4, 4, 4)
    with pytest.raises(GranularityError):
        best_response_search(bowtie_game, FIRST_PRICE_POORMAN, solution.max_policy(), MIN_SIDE, 8, 8, 4)
    with pytest.raises(GranularityError):
        best_response_search(bowtie_game, FIRST_PRICE_RICHMAN, solution.max_policy(), MIN_SIDE, 4, 4, 4)
    with pytest.raises(GameValidationError):
        best_response_search(bowtie_game, FIRST_PRICE_POORMAN, solution.max_policy(), MAX_SIDE, 4, 4, 4)


def test_table_policies_replay_in_simulator(bowtie_game):
    solution = discrete_minimax(bowtie_game, FIRST_PRICE_POORMAN, 10, 10, 20)
    f = solution.max_policy(unit=Fraction(1, 10))
    g = solution.min_policy(unit=Fraction(1, 10))
    assert isinstance(f, TablePolicy)
    record = run_play(bowtie_game, f, g, Fraction(1), Fraction(1), FIRST_PRICE_POORMAN, 20, 'v1')
    assert record.budget_max >= 0 and record.budget_min >= 0
    # every bid is a whole number of units
    assert all((e.bid_max * 10).denominator == 1 for e in record.entries)
    assert 0.0 <= mp_payoff_estimate(record, 1.0).full <= 1.0


def test_table_policy_clone_shares_tables(bowtie_game):
    policy = discrete_minimax(bowtie_game, FIRST_PRICE_POORMAN, 4, 4, 6).min_policy()
    clone = policy.fresh()
    assert clone is not policy
    assert clone.bids is policy.bids and clone.moves is policy.moves


def test_single_worker_gives_the_same_tables(bowtie_game, monkeypatch):
    threaded = discrete_minimax(bowtie_game, FIRST_PRICE_POORMAN, 6, 8, 10)
    monkeypatch.setenv('BIDGAME_THREADS', '1')
    serial = discrete_minimax(bowtie_game, FIRST_PRICE_POORMAN, 6, 8, 10)
    assert np.array_equal(threaded.lower, serial.lower)
    assert np.array_equal(threaded.upper, serial.upper)
    assert np.array_equal(threaded.upper_bids, serial.upper_bids)


def test_iter_states_and_serialisation(bowtie_game):
    solution = discrete_minimax(bowtie_game, FIRST_PRICE_RICHMAN, 2, 2, 3)
    states = list(solution.iter_states())
    # Richman keeps the total: 5 unit splits per vertex
    assert len(states) == 2 * 5
    assert all(s.units_max + s.units_min == 4 for s, _, _ in states)
    payload = solution.to_dict()
    assert payload['mechanism'] == 'first-price-richman'
    assert set(payload['values']) == {'v1', 'v0'}
