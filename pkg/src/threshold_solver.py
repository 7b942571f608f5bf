# src/threshold_solver.py - Reachability thresholds and the partial-information qualitative value

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Union

from errors import GameValidationError
from game_core import GameGraph, BudgetDistribution, format_fraction
from rt_solver import solve_rt_reach
from settings import THRESHOLD_BAND

logger = logging.getLogger(__name__)

Threshold = Union[Fraction, float]

# reachability values carry about REACH_TOL of iteration error
RATIONAL_MATCH = 1e-9


@dataclass(frozen=True)
class ThresholdMap:
    """Per-vertex threshold ratios Th(v) in [0, 1]"""
    thresholds: Dict[str, float]

    def __getitem__(self, vertex_id: str) -> float:
        return self.thresholds[vertex_id]

    def as_fraction(self, vertex_id: str, max_denominator: int = 10 ** 6,
                    max_error: float = RATIONAL_MATCH) -> Threshold:
        """Closest small-denominator rational when it lies within max_error"""
        value = self.thresholds[vertex_id]
        candidate = Fraction(value).limit_denominator(max_denominator)
        if abs(float(candidate) - value) <= max_error:
            return candidate
        return value

    def to_dict(self) -> Dict[str, Dict[str, object]]:
        result = {}
        for vid, value in self.thresholds.items():
            exact = self.as_fraction(vid)
            result[vid] = {
                'threshold': value,
                'exact': format_fraction(exact) if isinstance(exact, Fraction) else None
            }
        return result


def threshold_reach_richman(game: GameGraph) -> ThresholdMap:
    """Th(v) = 1 - P(v) where P is the uniform random-turn reachability value"""
    game.require_objective('reachability')
    reach = solve_rt_reach(game, 0.5)
    return ThresholdMap({vid: min(1.0, max(0.0, 1.0 - value)) for vid, value in reach.items()})


def _max_wins(budget_max: Fraction, budget_min: Fraction, th: Threshold) -> bool:
    """Strict ratio test; ties and near-ties go to Min"""
    total = budget_max + budget_min
    if total == 0:
        raise GameValidationError("ratio undefined when both budgets are 0")
    r = budget_max / total
    if isinstance(th, Fraction):
        return r > th
    return r - Fraction(th) > THRESHOLD_BAND


def qualitative_partial_value(th: Threshold, beta: BudgetDistribution,
                              gamma: BudgetDistribution) -> Fraction:
    """Probability mass of budget pairs whose ratio strictly exceeds the threshold"""
    if isinstance(th, int):
        th = Fraction(th)
    if not 0 <= th <= 1:
        raise GameValidationError(f"threshold {th} outside [0, 1]")

    value = Fraction(0)
    for budget_max, p_max in beta:
        for budget_min, p_min in gamma:
            if _max_wins(budget_max, budget_min, th):
                value += p_max * p_min
    logger.debug("Qualitative value at th=%s: %s", th, value)
    return value


def to_signed_payoff(value: Union[Fraction, float]) -> Union[Fraction, float]:
    """Win probability -> expected payoff in {-1, 1}"""
    return 2 * value - 1


def threshold_for(game: GameGraph, vertex_id: str, exact: Optional[bool] = True) -> Threshold:
    """Threshold at one vertex, as a rational when it is one"""
    thresholds = threshold_reach_richman(game)
    return thresholds.as_fraction(vertex_id) if exact else thresholds[vertex_id]
