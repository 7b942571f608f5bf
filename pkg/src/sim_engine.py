# src/sim_engine.py - Bidding play simulator, strategies and payoff estimation

import csv
import copy
import math
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Any, Mapping, Optional, Sequence, Tuple, Union, IO

import numpy as np

from errors import GameValidationError, IllegalBidError, IllegalMoveError
from game_core import GameGraph, Mechanism, BudgetDistribution, to_fraction
from rt_solver import rt_positional_choices
from settings import BID_TOLERANCE, DEFAULT_WINDOW, worker_count

logger = logging.getLogger(__name__)

MAX_SIDE, MIN_SIDE = 'Max', 'Min'
Budget = Union[Fraction, float]

CSV_COLUMNS = ['round', 'bid_max', 'bid_min', 'winner', 'vertex', 'budget_max', 'budget_min']


def opponent_of(side: str) -> str:
    return MIN_SIDE if side == MAX_SIDE else MAX_SIDE


@dataclass(frozen=True)
class RoundEntry:
    round: int
    bid_max: Budget
    bid_min: Budget
    winner: str
    vertex: str
    budget_max: Budget
    budget_min: Budget


class PlayRecord:
    """History of one play; budgets are derived from the running investments"""

    def __init__(self, game: GameGraph, mech: Mechanism, initial_vertex: str,
                 budget_max: Budget, budget_min: Budget):
        self.game = game
        self.mech = mech
        self.initial_vertex = initial_vertex
        self.initial_budget_max = budget_max
        self.initial_budget_min = budget_min
        self.entries: List[RoundEntry] = []
        self.inv_max: Budget = budget_max * 0
        self.inv_min: Budget = budget_min * 0
        self.vertex = initial_vertex

    @property
    def round(self) -> int:
        return len(self.entries)

    @property
    def budget_max(self) -> Budget:
        received = self.inv_min if not self.mech.is_poorman else 0
        return self.initial_budget_max - self.inv_max + received

    @property
    def budget_min(self) -> Budget:
        received = self.inv_max if not self.mech.is_poorman else 0
        return self.initial_budget_min - self.inv_min + received

    def budget(self, side: str) -> Budget:
        return self.budget_max if side == MAX_SIDE else self.budget_min

    def investment(self, side: str) -> Budget:
        return self.inv_max if side == MAX_SIDE else self.inv_min

    def record_round(self, bid_max: Budget, bid_min: Budget, winner: str, next_vertex: str) -> RoundEntry:
        if self.mech.is_all_pay:
            self.inv_max += bid_max
            self.inv_min += bid_min
        elif winner == MAX_SIDE:
            self.inv_max += bid_max
        else:
            self.inv_min += bid_min
        self.vertex = next_vertex
        entry = RoundEntry(self.round, bid_max, bid_min, winner, next_vertex,
                           self.budget_max, self.budget_min)
        self.entries.append(entry)
        return entry

    def weights(self) -> np.ndarray:
        """Weight of the vertex entered in each round"""
        return np.array([float(self.game.weight_of(e.vertex)) for e in self.entries])

    def wins(self, side: str) -> int:
        return sum(1 for e in self.entries if e.winner == side)

    def to_rows(self) -> List[Dict[str, Any]]:
        return [{
            'round': e.round,
            'bid_max': float(e.bid_max),
            'bid_min': float(e.bid_min),
            'winner': e.winner,
            'vertex': e.vertex,
            'budget_max': float(e.budget_max),
            'budget_min': float(e.budget_min)
        } for e in self.entries]


# ---------------------------------------------------------------- strategies

class Strategy(ABC):
    """Deterministic map from a play prefix to (bid, successor)"""

    def __init__(self, side: str, declared_budget: Optional[Budget] = None):
        if side not in (MAX_SIDE, MIN_SIDE):
            raise GameValidationError(f"unknown side {side!r}")
        self.side = side
        self.declared_budget = declared_budget

    def reset(self) -> None:
        """Clear per-play state before a new play"""

    def fresh(self) -> 'Strategy':
        clone = copy.deepcopy(self)
        clone.reset()
        return clone

    def act(self, record: PlayRecord) -> Tuple[Budget, str]:
        return self.decide(record, record.budget(self.side), record.budget(opponent_of(self.side)))

    @abstractmethod
    def decide(self, record: PlayRecord, own: Budget, opponent: Budget) -> Tuple[Budget, str]:
        """Bid and successor given the budgets this strategy believes in"""


def greedy_moves(game: GameGraph, side: str) -> Dict[str, str]:
    """Heaviest successor for Max, lightest for Min"""
    moves = {}
    for vid in game.ids:
        succ = game.successor_ids(vid)
        pick = max if side == MAX_SIDE else min
        moves[vid] = pick(succ, key=lambda u: game.weight_of(u))
    return moves


class ConstantBidStrategy(Strategy):
    """Bids a fixed amount (capped by the budget) and moves greedily"""

    def __init__(self, game: GameGraph, side: str, bid: Budget = 0,
                 moves: Optional[Dict[str, str]] = None):
        super().__init__(side)
        self.bid = bid
        self.moves = moves or greedy_moves(game, side)

    def decide(self, record, own, opponent):
        return min(self.bid, own), self.moves[record.vertex]


class RandomBidStrategy(Strategy):
    """Seeded random bids on a 1/granularity grid of the available budget"""

    def __init__(self, game: GameGraph, side: str, seed: int = 0, granularity: int = 1024):
        super().__init__(side)
        self.game = game
        self.seed = seed
        self.granularity = granularity
        self.reset()

    def reset(self) -> None:
        self.rng = np.random.default_rng(self.seed)

    def decide(self, record, own, opponent):
        share = Fraction(int(self.rng.integers(0, self.granularity + 1)), self.granularity)
        bid = own * share if isinstance(own, Fraction) else float(own) * float(share)
        successors = self.game.successor_ids(record.vertex)
        return bid, successors[int(self.rng.integers(0, len(successors)))]


class RatioPolicy(Strategy):
    """Full-information bidding around a target budget ratio.

    Max bids gain * (ratio - floor) * total while his ratio stays above
    floor = r - eps; Min bids gain * (cap - ratio) * total while Max's ratio
    stays below cap = r + eps. Moves follow the optimal positional choices of
    the random-turn game at bias r.
    """

    def __init__(self, game: GameGraph, side: str, budget: Budget, opponent_budget: Budget,
                 eps: float = 0.01, gain: float = 0.02):
        super().__init__(side, budget)
        if not 0 < gain <= 1:
            raise GameValidationError("gain must lie in (0, 1]")
        own, opp = float(budget), float(opponent_budget)
        if own + opp <= 0:
            raise GameValidationError("ratio policy needs a positive total budget")
        self.target = own / (own + opp) if side == MAX_SIDE else opp / (own + opp)
        self.floor = max(self.target - eps, 0.0)
        self.cap = min(self.target + eps, 1.0)
        self.gain = gain
        max_moves, min_moves = rt_positional_choices(game, self.target)
        self.moves = max_moves if side == MAX_SIDE else min_moves

    def decide(self, record, own, opponent):
        own_f, opp_f = max(float(own), 0.0), max(float(opponent), 0.0)
        total = own_f + opp_f
        move = self.moves[record.vertex]
        if total <= 0:
            return 0.0, move
        if self.side == MAX_SIDE:
            bid = self.gain * max(own_f / total - self.floor, 0.0) * total
        else:
            bid = self.gain * max(self.cap - opp_f / total, 0.0) * total
        return min(bid, own_f), move


class WalletStrategy(Strategy):
    """Max spends wallet i against Min's budget slice i, advancing once Min's investment exceeds C_i"""

    def __init__(self, xs: Sequence[Budget], subpolicies: Sequence[Strategy],
                 gamma: BudgetDistribution, mech: Mechanism):
        super().__init__(MAX_SIDE, xs[-1])
        self.xs = tuple(xs)
        self.subpolicies = tuple(subpolicies)
        self.cutoffs = gamma.budgets
        self.mech = mech
        self.reset()

    def reset(self) -> None:
        self.wallet = 0
        self.switch_rounds: List[int] = []
        for policy in self.subpolicies:
            policy.reset()

    def decide(self, record, own, opponent):
        inv_min = record.inv_min
        while self.wallet < len(self.xs) - 1 and inv_min > self.cutoffs[self.wallet]:
            self.wallet += 1
            self.switch_rounds.append(record.round)
            logger.debug("Round %d: Min invested %s, switching to wallet %d",
                         record.round, inv_min, self.wallet + 1)

        available = min(self.xs[self.wallet] - record.inv_max, own)
        available = max(available, available * 0)
        perceived = self.cutoffs[self.wallet] - inv_min
        perceived = max(perceived, perceived * 0)

        bid, move = self.subpolicies[self.wallet].decide(record, available, perceived)
        if bid > available + BID_TOLERANCE:
            raise IllegalBidError(f"{MAX_SIDE} wallet {self.wallet + 1}", record.round, bid, available)
        return bid, move


def wallet_strategy(xs: Sequence, subpolicies: Sequence[Strategy], gamma: BudgetDistribution,
                    mech: Mechanism) -> WalletStrategy:
    if not (len(xs) == len(subpolicies) == len(gamma)):
        raise GameValidationError("need one cut-point and one subpolicy per support atom")
    if any(b < a for a, b in zip(xs, xs[1:])) or xs[0] < 0:
        raise GameValidationError(f"cut-points must be non-negative and non-decreasing: {list(xs)}")
    if any(policy.side != MAX_SIDE for policy in subpolicies):
        raise GameValidationError("wallet subpolicies must play Max")
    return WalletStrategy(xs, subpolicies, gamma, mech)


class NaiveFullyInformedMin(Strategy):
    """Min reveals her true budget: the full-information policy from round one"""

    def __init__(self, budget: Budget, policy: Strategy):
        super().__init__(MIN_SIDE, budget)
        self.policy = policy

    def reset(self) -> None:
        self.policy.reset()

    def decide(self, record, own, opponent):
        return self.policy.decide(record, own, opponent)


def naive_fully_informed_min(C, B, table_policy: Optional[Strategy] = None,
                             game: Optional[GameGraph] = None, eps: float = 0.01,
                             gain: float = 0.02) -> NaiveFullyInformedMin:
    if table_policy is None:
        if game is None:
            raise GameValidationError("need a table policy or a game for the ratio policy")
        table_policy = RatioPolicy(game, MIN_SIDE, C, B, eps=eps, gain=gain)
    if table_policy.side != MIN_SIDE:
        raise GameValidationError("naive policy must play Min")
    return NaiveFullyInformedMin(C, table_policy)


# ---------------------------------------------------------------- plays

def _checked_bid(side: str, record: PlayRecord, bid: Budget, available: Budget) -> Budget:
    if bid < 0 or bid > available + BID_TOLERANCE:
        raise IllegalBidError(side, record.round, bid, available)
    return available if bid > available else bid


def _checked_move(side: str, record: PlayRecord, successor: str) -> str:
    if successor not in record.game.successor_ids(record.vertex):
        raise IllegalMoveError(side, record.round, record.vertex, successor)
    return successor


def run_play(game: GameGraph, f: Strategy, g: Strategy, B, C, mech: Mechanism, horizon: int,
             initial_vertex: Optional[str] = None) -> PlayRecord:
    """Play `horizon` rounds of f (Max) against g (Min)"""
    if horizon < 1:
        raise GameValidationError("horizon must be at least 1")
    if f.side != MAX_SIDE or g.side != MIN_SIDE:
        raise GameValidationError("f must play Max and g must play Min")
    start = initial_vertex or game.ids[0]
    if start not in game.index:
        raise GameValidationError(f"unknown initial vertex {start!r}")

    f.reset()
    g.reset()
    record = PlayRecord(game, mech, start, B, C)
    for _ in range(horizon):
        bid_max, move_max = f.act(record)
        bid_min, move_min = g.act(record)
        bid_max = _checked_bid(MAX_SIDE, record, bid_max, record.budget_max)
        bid_min = _checked_bid(MIN_SIDE, record, bid_min, record.budget_min)
        move_max = _checked_move(MAX_SIDE, record, move_max)
        move_min = _checked_move(MIN_SIDE, record, move_min)

        winner = MIN_SIDE if bid_min >= bid_max else MAX_SIDE
        record.record_round(bid_max, bid_min, winner, move_min if winner == MIN_SIDE else move_max)
    return record


@dataclass(frozen=True)
class PayoffEstimate:
    trailing: float
    full: float
    window: float


def mp_payoff_estimate(record: PlayRecord, window: float = DEFAULT_WINDOW) -> PayoffEstimate:
    """Trailing-window average weight (liminf proxy) and the full-horizon average"""
    if not 0 < window <= 1:
        raise GameValidationError(f"window {window} outside (0, 1]")
    weights = record.weights()
    if len(weights) == 0:
        raise GameValidationError("empty play record")
    tail = max(1, math.ceil(window * len(weights)))
    return PayoffEstimate(float(weights[-tail:].mean()), float(weights.mean()), window)


def _family_member(family: Mapping, budget: Fraction, label: str) -> Strategy:
    for key, strategy in family.items():
        if to_fraction(key) == budget:
            return strategy
    raise GameValidationError(f"{label} family has no strategy for budget {budget}")


def expected_payoff(game: GameGraph, fam_max: Mapping, fam_min: Mapping, beta: BudgetDistribution,
                    gamma: BudgetDistribution, mech: Mechanism, horizon: int,
                    window: float = DEFAULT_WINDOW, initial_vertex: Optional[str] = None) -> float:
    """Probability-weighted trailing payoff over every pair of support budgets"""
    pairs = [(b, pb, c, pc) for b, pb in beta for c, pc in gamma]

    def play(pair) -> float:
        b, _, c, _ = pair
        f = _family_member(fam_max, b, MAX_SIDE).fresh()
        g = _family_member(fam_min, c, MIN_SIDE).fresh()
        record = run_play(game, f, g, b, c, mech, horizon, initial_vertex)
        estimate = mp_payoff_estimate(record, window)
        logger.debug("B=%s C=%s: trailing %.4f full %.4f", b, c, estimate.trailing, estimate.full)
        return estimate.trailing

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        payoffs = list(pool.map(play, pairs))

    # summed in support order so repeated runs agree bit for bit
    return math.fsum(float(pb * pc) * payoff for (_, pb, _, pc), payoff in zip(pairs, payoffs))


def export_csv(record: PlayRecord, target: Union[str, IO[str]]) -> None:
    """Write the transcript as CSV to a path or an open text stream"""
    if isinstance(target, str):
        with open(target, 'w', newline='') as handle:
            export_csv(record, handle)
        return
    writer = csv.DictWriter(target, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    writer.writerows(record.to_rows())
