# tests/conftest.py - Shared fixtures; solver modules live flat under src/

import os
import sys
from fractions import Fraction

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(__file__)), 'src'))

from game_core import bowtie, build_game, make_distribution  # noqa: E402

GAME_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'game_files')


@pytest.fixture
def game_dir():
    return GAME_DIR


@pytest.fixture
def bowtie_game():
    return bowtie()


@pytest.fixture
def path_game():
    """t2 <- v0 <-> v1 -> t1 with absorbing ends; t1 is the target"""
    return build_game({
        'objective': 'reachability',
        'vertices': [{'id': 'v0'}, {'id': 'v1'}, {'id': 't1', 'target': True}, {'id': 't2'}],
        'edges': [['v0', 'v1'], ['v0', 't2'], ['v1', 'v0'], ['v1', 't1'], ['t1', 't1'], ['t2', 't2']],
    })


@pytest.fixture
def three_cycle():
    return build_game({
        'objective': 'mean-payoff',
        'vertices': [{'id': 'a', 'weight': 2}, {'id': 'b', 'weight': -1}, {'id': 'c', 'weight': '1/2'}],
        'edges': [['a', 'b'], ['b', 'c'], ['c', 'a']],
    })


@pytest.fixture
def uniform_1_2():
    return make_distribution([(1, Fraction(1, 2)), (2, Fraction(1, 2))])


@pytest.fixture
def uniform_1_3():
    return make_distribution([(1, Fraction(1, 2)), (3, Fraction(1, 2))])


@pytest.fixture
def uniform_1_5():
    return make_distribution([(1, Fraction(1, 2)), (5, Fraction(1, 2))])


@pytest.fixture
def point_1():
    return make_distribution([(1, 1)])
