# tests/test_game_core.py - Game graphs, mechanisms, distributions and validation rules

import json
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest

from errors import GameValidationError
from game_core import (Mechanism, ALL_MECHANISMS, FIRST_PRICE_POORMAN, ALL_PAY_RICHMAN, Vertex,
                       GameGraph, build_game, parse_game, serialize_game, bowtie, load_game,
                       make_distribution, load_distribution, parse_distribution, to_fraction,
                       ratio, is_two_vertex_complete)
from game_validator import GameValidator


def test_bowtie_shape(bowtie_game):
    assert bowtie_game.n == 2
    assert len(bowtie_game.edges) == 4
    assert bowtie_game.weight_of('v1') == 1
    assert bowtie_game.is_strongly_connected
    assert is_two_vertex_complete(bowtie_game)


def test_bowtie_file_matches_builder(game_dir):
    assert load_game(f"{game_dir}/bowtie.json") == bowtie()
    assert load_game('bowtie') == bowtie()


def test_single_self_loop_is_valid():
    game = build_game({'objective': 'mean-payoff', 'vertices': [{'id': 'x', 'weight': 0}],
                       'edges': [['x', 'x']]})
    assert game.successor_ids('x') == ('x',)


def test_one_way_edge_is_rejected():
    with pytest.raises(GameValidationError, match="no successor"):
        build_game({'objective': 'mean-payoff', 'vertices': [{'id': 'u'}, {'id': 'v'}],
                    'edges': [['u', 'v']]})


def test_not_strongly_connected_mean_payoff_rejected():
    with pytest.raises(GameValidationError, match="strongly connected"):
        build_game({'objective': 'mean-payoff', 'vertices': [{'id': 'u'}, {'id': 'v'}],
                    'edges': [['u', 'v'], ['u', 'u'], ['v', 'v']]})


def _reaches_everything(game):
    for start in game.ids:
        seen, frontier = {start}, [start]
        while frontier:
            for u in game.successor_ids(frontier.pop()):
                if u not in seen:
                    seen.add(u)
                    frontier.append(u)
        if len(seen) < game.n:
            return False
    return True


def test_strong_connectivity_matches_naive_search():
    rng = np.random.default_rng(11)
    for _ in range(60):
        n = int(rng.integers(1, 9))
        edges = {(f"v{i}", f"v{int(rng.integers(0, n))}") for i in range(n)}
        edges |= {(f"v{int(rng.integers(0, n))}", f"v{int(rng.integers(0, n))}") for _ in range(n)}
        game = build_game({'objective': 'reachability',
                           'vertices': [{'id': f"v{i}", 'target': i == 0} for i in range(n)],
                           'edges': [list(e) for e in sorted(edges)]})
        assert game.is_strongly_connected == _reaches_everything(game)


@pytest.mark.parametrize('document', [
    '{"objective": "mean-payoff", "vertices": [], "edges": []}',
    '{"objective": "parity", "vertices": [{"id": "a"}], "edges": [["a", "a"]]}',
    '{"objective": "mean-payoff", "vertices": [{"id": "a", "weight": "one"}], "edges": [["a", "a"]]}',
    '{"objective": "mean-payoff", "vertices": [{"id": "a"}], "edges": [["a", "b"]]}',
    '{"objective": "mean-payoff", "vertices": [{"id": "a"}, {"id": "a"}], "edges": [["a", "a"]]}',
    'not json',
])
def test_malformed_games(document):
    with pytest.raises(GameValidationError):
        parse_game(document)


def test_reachability_needs_a_target():
    with pytest.raises(GameValidationError, match="target"):
        build_game({'objective': 'reachability', 'vertices': [{'id': 'a'}], 'edges': [['a', 'a']]})


def test_serialize_round_trip_keeps_exact_weights(three_cycle):
    text = serialize_game(three_cycle)
    assert json.loads(text)['vertices'][2]['weight'] == '1/2'
    assert parse_game(text) == three_cycle
    assert parse_game(text.encode('utf-8')).weight_of('c') == Fraction(1, 2)


def test_validator_report_counts():
    stub = SimpleNamespace(
        objective='reachability',
        vertices=[Vertex('a', is_target=True), Vertex('b')],
        edges=[('a', 'a'), ('b', 'b')],
    )
    report = GameValidator().validate_game(stub)
    assert report['failed_checks'] == 0
    assert report['warnings'] == 1
    assert "'b' cannot reach a target" in report['warnings_list'][0]
    assert report['passed_checks'] + report['warnings'] == report['total_checks']


def test_validator_lists_every_failure():
    stub = SimpleNamespace(objective='mean-payoff', vertices=[Vertex('a'), Vertex('a')],
                           edges=[('a', 'z')])
    report = GameValidator().validate_game(stub)
    assert report['failed_checks'] >= 3
    assert any("declared more than once" in issue for issue in report['critical_issues'])
    assert report['suggestions']


def test_game_graph_direct_construction_validates():
    with pytest.raises(GameValidationError):
        GameGraph((Vertex('a'),), (), 'mean-payoff')


def test_to_fraction():
    assert to_fraction(0.2) == Fraction(1, 5)
    assert to_fraction('3/4') == Fraction(3, 4)
    assert to_fraction(' 1 / 3 ') == Fraction(1, 3)
    assert to_fraction(7) == 7
    with pytest.raises(GameValidationError):
        to_fraction(True)
    with pytest.raises(GameValidationError):
        to_fraction('1/0')


def test_ratio():
    assert ratio(1, 2) == Fraction(1, 3)
    assert ratio(0, 5) == 0
    with pytest.raises(GameValidationError):
        ratio(0, 0)


@pytest.mark.parametrize('text, expected', [
    ('first-price-poorman', FIRST_PRICE_POORMAN),
    ('fp-poorman', FIRST_PRICE_POORMAN),
    ('AP_RICHMAN', ALL_PAY_RICHMAN),
    ('all-pay-richman', ALL_PAY_RICHMAN),
])
def test_mechanism_parse(text, expected):
    assert Mechanism.parse(text) == expected


def test_mechanism_names_unique():
    assert len({mech.name for mech in ALL_MECHANISMS}) == 4
    assert all(Mechanism.parse(mech.name) == mech for mech in ALL_MECHANISMS)
    with pytest.raises(GameValidationError):
        Mechanism.parse('second-price-poorman')


def test_make_distribution_examples():
    gamma = make_distribution([(2, Fraction(1, 2)), (1, Fraction(1, 2))])
    assert gamma.budgets == (1, 2)
    assert gamma.probabilities == (Fraction(1, 2), Fraction(1, 2))
    assert make_distribution([(5, 1)]).is_point


@pytest.mark.parametrize('pairs', [
    [(1, Fraction(1, 2)), (1, Fraction(1, 2))],
    [(1, Fraction(1, 2))],
    [(-1, 1)],
    [(1, 0), (2, 1)],
    [],
])
def test_make_distribution_rejects(pairs):
    with pytest.raises(GameValidationError):
        make_distribution(pairs)


def test_distribution_shorthands(game_dir):
    assert load_distribution('uniform:1,2') == make_distribution([(1, Fraction(1, 2)), (2, Fraction(1, 2))])
    assert load_distribution('point:0.2').budgets == (Fraction(1, 5),)
    assert load_distribution(f"{game_dir}/gamma_uniform_1_3.json").budgets == (1, 3)
    assert load_distribution('{"atoms": [[1, 1]]}').is_point
    with pytest.raises(FileNotFoundError):
        load_distribution('no_such_distribution.json')


def test_distribution_json_must_sum_to_one():
    with pytest.raises(GameValidationError, match="sum"):
        parse_distribution('{"atoms": [["1", "1/3"], ["2", "1/3"]]}')


def test_missing_game_file():
    with pytest.raises(FileNotFoundError):
        load_game('no_such_game.json')
