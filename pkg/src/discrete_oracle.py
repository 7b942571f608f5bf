# src/discrete_oracle.py - Integer-unit backward induction for small bidding games
#
# Budgets are counted in integer units and plays last a fixed number of rounds;
# the objective is the total weight of the vertices entered. Two tables bracket
# the simultaneous-bid value: `lower` lets Max commit to his bid and move first,
# `upper` lets Min commit first. Against a committed bid the responder only ever
# needs to match it (Min, ties win), outbid it by one unit (Max) or bid 0.

import copy
import math
import logging
from abc import abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Any, Iterator, Optional, Tuple

import numpy as np

from errors import GameValidationError, OracleCapacityError, GranularityError
from game_core import GameGraph, Mechanism
from sim_engine import Strategy, MAX_SIDE, MIN_SIDE, greedy_moves
from settings import MAX_UNITS, MAX_HORIZON, MAX_VERTICES, worker_count

logger = logging.getLogger(__name__)

UNIT_SLACK = 1e-9


@dataclass(frozen=True)
class DiscreteState:
    vertex: str
    units_max: int
    units_min: int
    rounds_left: int


def post_budgets(mech: Mechanism, a, b, x, y, max_wins):
    """Unit budgets after Max bids x and Min bids y"""
    if mech.is_all_pay:
        if mech.is_poorman:
            return a - x, b - y
        return a - x + y, b - y + x
    pay_max = np.where(max_wins, x, 0)
    pay_min = np.where(max_wins, 0, y)
    if mech.is_poorman:
        return a - pay_max, b - pay_min
    return a - pay_max + pay_min, b - pay_min + pay_max


def _lookup(table: np.ndarray, vertex, a, b, fill: float) -> np.ndarray:
    """table[vertex, a, b] where (a, b) is in range, fill elsewhere"""
    _, na, nb = table.shape
    inside = (a >= 0) & (a < na) & (b >= 0) & (b < nb)
    values = table[vertex, np.clip(a, 0, na - 1), np.clip(b, 0, nb - 1)]
    return np.where(inside, values, fill)


class _Layout:
    """Shared shapes and index grids for one oracle instance"""

    def __init__(self, game: GameGraph, mech: Mechanism, units_max: int, units_min: int):
        self.game = game
        self.mech = mech
        self.units_max = units_max
        self.units_min = units_min
        self.total = units_max + units_min
        if mech.is_poorman:
            self.shape = (game.n, units_max + 1, units_min + 1)
        else:
            # transfers keep a + b constant, so either side may hold everything
            self.shape = (game.n, self.total + 1, self.total + 1)
        self.V, self.A, self.B = np.indices(self.shape)
        width = max(len(s) for s in game.successors)
        self.succ = np.array([list(s) + [s[0]] * (width - len(s)) for s in game.successors])
        self.weights = game.weights

    def valid(self) -> np.ndarray:
        if self.mech.is_poorman:
            return np.ones(self.shape, dtype=bool)
        return self.A + self.B == self.total

    def successor_values(self, previous: np.ndarray):
        """Entering value per vertex and the best successor for each side"""
        entering = self.weights[:, None, None] + previous
        options = entering[self.succ]                      # (n, width, NA, NB)
        max_arg = options.argmax(axis=1)
        min_arg = options.argmin(axis=1)
        best_max = np.take_along_axis(options, max_arg[:, None], axis=1)[:, 0]
        best_min = np.take_along_axis(options, min_arg[:, None], axis=1)[:, 0]
        rows = np.arange(self.shape[0])[:, None, None]
        return entering, best_max, self.succ[rows, max_arg], best_min, self.succ[rows, min_arg]


# ---------------------------------------------------------------- policies

class UnitPolicy(Strategy):
    """Strategy defined on integer unit budgets"""

    def __init__(self, game: GameGraph, side: str, unit: Fraction, horizon: int):
        super().__init__(side)
        self.game = game
        self.unit = unit
        self.horizon = horizon

    @abstractmethod
    def policy_tables(self, layout: _Layout, horizon: int) -> Tuple[np.ndarray, np.ndarray]:
        """(bids, moves) indexed [rounds_left, vertex, units_max, units_min]"""

    def _units(self, budget) -> int:
        if isinstance(budget, Fraction) and isinstance(self.unit, Fraction):
            return max(0, math.floor(budget / self.unit))
        return max(0, math.floor(float(budget) / float(self.unit) + UNIT_SLACK))


class TablePolicy(UnitPolicy):
    """Oracle-extracted policy replayed inside the simulator"""

    def __init__(self, game: GameGraph, side: str, mech: Mechanism, bids: np.ndarray,
                 moves: np.ndarray, units_max: int, units_min: int, horizon: int,
                 unit: Optional[Fraction] = None):
        if unit is None:
            unit = Fraction(1, units_max) if units_max else Fraction(1)
        super().__init__(game, side, unit, horizon)
        self.mech = mech
        self.bids = bids
        self.moves = moves
        self.units_max = units_max
        self.units_min = units_min

    def __deepcopy__(self, memo):
        # tables are read-only; a clone shares them
        clone = copy.copy(self)
        memo[id(self)] = clone
        return clone

    def policy_tables(self, layout: _Layout, horizon: int):
        if (layout.units_max, layout.units_min, horizon) != (self.units_max, self.units_min, self.horizon) \
                or layout.mech.is_poorman != self.mech.is_poorman:
            raise GranularityError(
                f"policy built for units ({self.units_max}, {self.units_min}) and horizon {self.horizon}, "
                f"asked for ({layout.units_max}, {layout.units_min}) and horizon {horizon}")
        return self.bids, self.moves

    def units_decision(self, state: DiscreteState) -> Tuple[int, str]:
        v = self.game.index[state.vertex]
        k = state.rounds_left
        bid = int(self.bids[k, v, state.units_max, state.units_min])
        return bid, self.game.ids[int(self.moves[k, v, state.units_max, state.units_min])]

    def decide(self, record, own, opponent):
        _, na, nb = self.bids.shape[1:]
        own_units = self._units(own)
        if self.mech.is_poorman:
            opp_units = self._units(opponent)
        else:
            opp_units = self.units_max + self.units_min - own_units
        if self.side == MAX_SIDE:
            a, b = min(own_units, na - 1), min(max(opp_units, 0), nb - 1)
        else:
            a, b = min(max(opp_units, 0), na - 1), min(own_units, nb - 1)
        rounds_left = self.horizon - record.round % self.horizon
        bid_units, move = self.units_decision(DiscreteState(record.vertex, a, b, rounds_left))
        bid = bid_units * self.unit
        return min(bid, own), move


class FixedBidPolicy(UnitPolicy):
    """Constant unit bid (capped by the budget) with weight-greedy moves"""

    def __init__(self, game: GameGraph, side: str, bid_units: int = 0,
                 unit: Fraction = Fraction(1), horizon: int = 1):
        super().__init__(game, side, unit, horizon)
        self.bid_units = bid_units
        self.moves = greedy_moves(game, side)

    def policy_tables(self, layout: _Layout, horizon: int):
        own_axis = layout.A if self.side == MAX_SIDE else layout.B
        layer_bids = np.minimum(self.bid_units, own_axis)
        move_index = np.array([self.game.index[self.moves[vid]] for vid in self.game.ids])
        layer_moves = np.broadcast_to(move_index[:, None, None], layout.shape)
        bids = np.broadcast_to(layer_bids, (horizon + 1,) + layout.shape)
        moves = np.broadcast_to(layer_moves, (horizon + 1,) + layout.shape)
        return bids, moves

    def decide(self, record, own, opponent):
        bid = min(self.bid_units * self.unit, own)
        return bid, self.moves[record.vertex]


# ---------------------------------------------------------------- oracle

@dataclass
class OracleSolution:
    game: GameGraph
    mech: Mechanism
    units_max: int
    units_min: int
    horizon: int
    lower: np.ndarray
    upper: np.ndarray
    lower_bids: np.ndarray
    lower_moves: np.ndarray
    upper_bids: np.ndarray
    upper_moves: np.ndarray

    def bracket(self, state: DiscreteState) -> Tuple[float, float]:
        """Average-weight bracket [lower, upper] at a state"""
        if state.rounds_left < 1:
            raise GameValidationError("rounds_left must be at least 1")
        v = self.game.index[state.vertex]
        k = state.rounds_left
        idx = (k, v, state.units_max, state.units_min)
        return float(self.lower[idx]) / k, float(self.upper[idx]) / k

    def root_state(self, vertex: Optional[str] = None) -> DiscreteState:
        return DiscreteState(vertex or self.game.ids[0], self.units_max, self.units_min, self.horizon)

    def root_bracket(self, vertex: Optional[str] = None) -> Tuple[float, float]:
        return self.bracket(self.root_state(vertex))

    def iter_states(self, rounds_left: Optional[int] = None) -> Iterator[Tuple[DiscreteState, float, float]]:
        k = rounds_left or self.horizon
        layout = _Layout(self.game, self.mech, self.units_max, self.units_min)
        for v, a, b in zip(*np.nonzero(layout.valid())):
            state = DiscreteState(self.game.ids[v], int(a), int(b), k)
            yield (state,) + self.bracket(state)

    def max_policy(self, unit: Optional[Fraction] = None) -> TablePolicy:
        return TablePolicy(self.game, MAX_SIDE, self.mech, self.lower_bids, self.lower_moves,
                           self.units_max, self.units_min, self.horizon, unit)

    def min_policy(self, unit: Optional[Fraction] = None) -> TablePolicy:
        return TablePolicy(self.game, MIN_SIDE, self.mech, self.upper_bids, self.upper_moves,
                           self.units_max, self.units_min, self.horizon, unit)

    def to_dict(self) -> Dict[str, Any]:
        roots = {}
        for vid in self.game.ids:
            lo, hi = self.root_bracket(vid)
            roots[vid] = {'lower': lo, 'upper': hi}
        return {
            'mechanism': self.mech.name,
            'units_max': self.units_max,
            'units_min': self.units_min,
            'horizon': self.horizon,
            'values': roots
        }


def _check_caps(game: GameGraph, units_max: int, units_min: int, horizon: int) -> None:
    if units_max < 0 or units_min < 0:
        raise GameValidationError("unit budgets must be non-negative")
    if horizon < 1:
        raise GameValidationError("horizon must be at least 1")
    if units_max > MAX_UNITS or units_min > MAX_UNITS:
        raise OracleCapacityError(f"unit budgets ({units_max}, {units_min}) exceed the cap {MAX_UNITS}")
    if horizon > MAX_HORIZON:
        raise OracleCapacityError(f"horizon {horizon} exceeds the cap {MAX_HORIZON}")
    if game.n > MAX_VERTICES:
        raise OracleCapacityError(f"{game.n} vertices exceed the cap {MAX_VERTICES}")


def _lower_layer(layout: _Layout, previous: np.ndarray):
    """Max commits to (x, successor); Min answers with y = x or y = 0"""
    mech, V, A, B = layout.mech, layout.V, layout.A, layout.B
    _, best_max, max_arg, best_min, _ = layout.successor_values(previous)

    best = np.full(layout.shape, -np.inf)
    best_x = np.zeros(layout.shape, dtype=np.int16)
    for x in range(layout.shape[1]):
        a_l, b_l = post_budgets(mech, A, B, x, x, False)
        matched = np.where(B >= x, _lookup(best_min, V, a_l, b_l, np.inf), np.inf)
        if x == 0:
            outcome = matched
        else:
            a_w, b_w = post_budgets(mech, A, B, x, 0, True)
            won = np.where(A >= x, _lookup(best_max, V, a_w, b_w, -np.inf), -np.inf)
            outcome = np.minimum(won, matched)
        better = outcome > best
        best = np.where(better, outcome, best)
        best_x = np.where(better, x, best_x)

    a_w, b_w = post_budgets(mech, A, B, best_x, 0, best_x > 0)
    na, nb = layout.shape[1:]
    moves = max_arg[V, np.clip(a_w, 0, na - 1), np.clip(b_w, 0, nb - 1)]
    return best, best_x, moves.astype(np.int8)


def _upper_layer(layout: _Layout, previous: np.ndarray):
    """Min commits to (y, successor); Max answers with x = 0 or x = y + 1"""
    mech, V, A, B = layout.mech, layout.V, layout.A, layout.B
    _, best_max, _, best_min, min_arg = layout.successor_values(previous)

    best = np.full(layout.shape, np.inf)
    best_y = np.zeros(layout.shape, dtype=np.int16)
    for y in range(layout.shape[2]):
        a_l, b_l = post_budgets(mech, A, B, 0, y, False)
        conceded = np.where(B >= y, _lookup(best_min, V, a_l, b_l, np.inf), np.inf)
        a_w, b_w = post_budgets(mech, A, B, y + 1, y, True)
        outbid = np.where(A >= y + 1, _lookup(best_max, V, a_w, b_w, -np.inf), -np.inf)
        outcome = np.maximum(conceded, outbid)
        better = outcome < best
        best = np.where(better, outcome, best)
        best_y = np.where(better, y, best_y)

    a_l, b_l = post_budgets(mech, A, B, 0, best_y, False)
    na, nb = layout.shape[1:]
    moves = min_arg[V, np.clip(a_l, 0, na - 1), np.clip(b_l, 0, nb - 1)]
    return best, best_y, moves.astype(np.int8)


def _exhaustive_layers(layout: _Layout, previous_lower: np.ndarray, previous_upper: np.ndarray):
    """Both commitment orders by enumerating every bid pair; small instances only"""
    mech = layout.mech
    succ = layout.game.successors
    results = []
    for previous, max_commits in ((previous_lower, True), (previous_upper, False)):
        entering, best_max, _, best_min, _ = layout.successor_values(previous)
        values = np.zeros(layout.shape)
        bids = np.zeros(layout.shape, dtype=np.int16)
        moves = np.zeros(layout.shape, dtype=np.int8)
        for v, a, b in zip(*np.nonzero(layout.valid())):
            def outcome(x, y, committed):
                if max_commits:
                    if y >= x:
                        a2, b2 = post_budgets(mech, a, b, x, y, False)
                        return best_min[v, a2, b2]
                    a2, b2 = post_budgets(mech, a, b, x, y, True)
                    return entering[committed, a2, b2]
                if x > y:
                    a2, b2 = post_budgets(mech, a, b, x, y, True)
                    return best_max[v, a2, b2]
                a2, b2 = post_budgets(mech, a, b, x, y, False)
                return entering[committed, a2, b2]

            if max_commits:
                choice = max(((min(outcome(x, y, u) for y in range(b + 1)), x, u)
                              for x in range(a + 1) for u in succ[v]), key=lambda t: t[0])
            else:
                choice = min(((max(outcome(x, y, u) for x in range(a + 1)), y, u)
                              for y in range(b + 1) for u in succ[v]), key=lambda t: t[0])
            values[v, a, b], bids[v, a, b], moves[v, a, b] = choice
        results.append((values, bids, moves))
    return results


def discrete_minimax(game: GameGraph, mech: Mechanism, units_max: int, units_min: int,
                     horizon: int, exhaustive: bool = False) -> OracleSolution:
    """Backward induction over (vertex, unit budgets, rounds left)"""
    _check_caps(game, units_max, units_min, horizon)
    layout = _Layout(game, mech, units_max, units_min)
    layers = (horizon + 1,) + layout.shape
    lower, upper = np.zeros(layers), np.zeros(layers)
    lower_bids, upper_bids = np.zeros(layers, dtype=np.int16), np.zeros(layers, dtype=np.int16)
    lower_moves, upper_moves = np.zeros(layers, dtype=np.int8), np.zeros(layers, dtype=np.int8)

    with ThreadPoolExecutor(max_workers=min(2, worker_count())) as pool:
        for k in range(1, horizon + 1):
            if exhaustive:
                (lo, lo_bid, lo_move), (hi, hi_bid, hi_move) = _exhaustive_layers(layout, lower[k - 1], upper[k - 1])
            else:
                lower_job = pool.submit(_lower_layer, layout, lower[k - 1])
                upper_job = pool.submit(_upper_layer, layout, upper[k - 1])
                lo, lo_bid, lo_move = lower_job.result()
                hi, hi_bid, hi_move = upper_job.result()
            lower[k], lower_bids[k], lower_moves[k] = lo, lo_bid, lo_move
            upper[k], upper_bids[k], upper_moves[k] = hi, hi_bid, hi_move

    solution = OracleSolution(game, mech, units_max, units_min, horizon, lower, upper,
                              lower_bids, lower_moves, upper_bids, upper_moves)
    logger.info("Oracle %s units (%d, %d) horizon %d: root bracket %s",
                mech, units_max, units_min, horizon, solution.root_bracket())
    return solution


@dataclass(frozen=True)
class BestResponse:
    side: str
    values: Dict[str, float]
    policy: TablePolicy
    initial_vertex: str

    @property
    def value(self) -> float:
        return self.values[self.initial_vertex]

    def to_dict(self) -> Dict[str, Any]:
        return {'side': self.side, 'value': self.value, 'values': dict(self.values)}


def best_response_search(game: GameGraph, mech: Mechanism, fixed: Strategy, side: str,
                         units_max: int, units_min: int, horizon: int,
                         initial_vertex: Optional[str] = None) -> BestResponse:
    """Exact best response of `side` against a fixed unit policy of the other side"""
    _check_caps(game, units_max, units_min, horizon)
    if not isinstance(fixed, UnitPolicy):
        raise GranularityError("fixed strategy must be a unit policy to be replayed by the oracle")
    if fixed.side == side:
        raise GameValidationError("the fixed strategy and the responder must be opponents")

    layout = _Layout(game, mech, units_max, units_min)
    fixed_bids, fixed_moves = fixed.policy_tables(layout, horizon)
    V, A, B = layout.V, layout.A, layout.B
    layers = (horizon + 1,) + layout.shape
    values = np.zeros(layers)
    bids = np.zeros(layers, dtype=np.int16)
    moves = np.zeros(layers, dtype=np.int8)
    na, nb = layout.shape[1:]

    for k in range(1, horizon + 1):
        entering, best_max, max_arg, best_min, min_arg = layout.successor_values(values[k - 1])
        their_bid = fixed_bids[k].astype(np.int64)
        their_move = fixed_moves[k].astype(np.int64)

        if side == MAX_SIDE:
            best = np.full(layout.shape, -np.inf)
            for x in range(na):
                wins = x > their_bid
                a2, b2 = post_budgets(mech, A, B, x, their_bid, wins)
                outcome = np.where(wins, _lookup(best_max, V, a2, b2, -np.inf),
                                   _lookup(entering, their_move, a2, b2, -np.inf))
                outcome = np.where(A >= x, outcome, -np.inf)
                better = outcome > best
                best = np.where(better, outcome, best)
                bids[k] = np.where(better, x, bids[k])
                moves[k] = np.where(better, max_arg[V, np.clip(a2, 0, na - 1), np.clip(b2, 0, nb - 1)], moves[k])
        else:
            best = np.full(layout.shape, np.inf)
            for y in range(nb):
                wins = y >= their_bid
                a2, b2 = post_budgets(mech, A, B, their_bid, y, ~wins)
                outcome = np.where(wins, _lookup(best_min, V, a2, b2, np.inf),
                                   _lookup(entering, their_move, a2, b2, np.inf))
                outcome = np.where(B >= y, outcome, np.inf)
                better = outcome < best
                best = np.where(better, outcome, best)
                bids[k] = np.where(better, y, bids[k])
                moves[k] = np.where(better, min_arg[V, np.clip(a2, 0, na - 1), np.clip(b2, 0, nb - 1)], moves[k])
        values[k] = best

    start = initial_vertex or game.ids[0]
    root = {vid: float(values[horizon, game.index[vid], units_max, units_min]) / horizon for vid in game.ids}
    policy = TablePolicy(game, side, mech, bids, moves, units_max, units_min, horizon)
    logger.info("Best response for %s: %.6f", side, root[start])
    return BestResponse(side, root, policy, start)
