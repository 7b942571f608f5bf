# src/potential_ledger.py - Fully informed Min on the bowtie: potential, value gap, ledger checks

import math
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Any, Optional, Sequence, Tuple

from errors import GameValidationError
from game_core import BudgetDistribution, FIRST_PRICE_POORMAN, bowtie, to_fraction
from mp_partial_solver import optimize_partial_value
from settings import DEFAULT_TOL, DEFAULT_GRID

logger = logging.getLogger(__name__)

DEFAULT_LEDGER_ROUNDS = 50


def _pot(budget: Fraction, supports: Sequence[Fraction], probs: Sequence[Fraction]) -> Fraction:
    total = Fraction(0)
    for c, prob in zip(supports, probs):
        if budget + c == 0:
            raise GameValidationError("potential undefined for an atom with B = C = 0")
        total += prob * budget / (budget + c)
    return total


def potential(B, gamma: BudgetDistribution) -> Fraction:
    """Expected initial ratio: sum of gamma(C) * B / (B + C)"""
    budget = to_fraction(B)
    if budget < 0:
        raise GameValidationError("budget must be non-negative")
    return _pot(budget, gamma.budgets, gamma.probabilities)


def fully_informed_value_bowtie(B, gamma: BudgetDistribution) -> Fraction:
    """Best payoff a fully informed Min can hold Max to on the bowtie"""
    return potential(B, gamma)


@dataclass(frozen=True)
class GapReport:
    mp_down: float
    mp_up: Fraction
    gap: float
    xs: Tuple[float, ...]
    tolerance: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mp_down': self.mp_down,
            'mp_up': float(self.mp_up),
            'gap': self.gap,
            'xs': list(self.xs),
            'tolerance': self.tolerance
        }


def value_gap_report(B, gamma: BudgetDistribution, tol: float = DEFAULT_TOL,
                     grid_points: int = DEFAULT_GRID) -> GapReport:
    """Lower value (partially informed Max) against upper value (potential) on the bowtie"""
    lower = optimize_partial_value(bowtie(), B, gamma, FIRST_PRICE_POORMAN, tol, grid_points)
    upper = potential(B, gamma)
    gap = float(upper) - lower.value
    if gap < -lower.uncertainty:
        logger.warning("Negative value gap %.3e exceeds the optimizer tolerance", gap)
    return GapReport(lower.value, upper, gap, lower.xs, lower.uncertainty)


@dataclass(frozen=True)
class LedgerRow:
    round: int
    budget_max: Fraction
    min_budgets: Tuple[Fraction, ...]
    stake_max: Fraction
    stake_min: Fraction
    potential: Fraction
    p2: bool
    p3: bool
    p4: bool
    case_one: bool
    induction: bool
    jensen: Optional[bool]

    @property
    def holds(self) -> bool:
        checks = (self.p2, self.p3, self.p4, self.case_one, self.induction)
        return all(checks) and self.jensen is not False

    def to_dict(self) -> Dict[str, Any]:
        return {
            'round': self.round,
            'budget_max': float(self.budget_max),
            'min_budgets': [float(c) for c in self.min_budgets],
            'stake_max': float(self.stake_max),
            'stake_min': float(self.stake_min),
            'potential': float(self.potential),
            'p2': self.p2,
            'p3': self.p3,
            'p4': self.p4,
            'case_one': self.case_one,
            'induction': self.induction,
            'jensen': self.jensen
        }


@dataclass(frozen=True)
class LedgerTrace:
    rows: Tuple[LedgerRow, ...]
    verdict: bool
    round_bound: Optional[int]
    lam: Fraction
    rho: Fraction
    pot: Fraction
    eps: Fraction

    def to_dict(self) -> Dict[str, Any]:
        return {
            'verdict': self.verdict,
            'round_bound': self.round_bound,
            'lambda': float(self.lam),
            'rho': float(self.rho),
            'potential': float(self.pot),
            'eps': float(self.eps),
            'rows': [row.to_dict() for row in self.rows]
        }


def round_bound(B: Fraction, c_first: Fraction, lam: Fraction, rho: Fraction) -> Optional[int]:
    """Smallest i with C_1 - rho (1 - lam^i) B <= 0, or None if no round reaches it"""
    def exhausted(i: int) -> bool:
        return c_first - rho * (1 - lam ** i) * B <= 0

    if c_first <= 0:
        return 0
    if rho * B <= c_first:
        return None
    estimate = math.log(1 - float(c_first / (rho * B))) / math.log(float(lam))
    i = max(0, math.ceil(estimate))
    while i > 0 and exhausted(i - 1):
        i -= 1
    while not exhausted(i):
        i += 1
    return i


def _convex_step(B: Fraction, lam: Fraction, rho: Fraction, i: int, gamma: BudgetDistribution,
                 pot: Fraction, pot_next: Fraction) -> bool:
    """Pot after the step equals sum gamma f(B/(B+C_j)), which dominates f(Pot) = Pot"""
    x = (1 - lam ** (i + 1)) * B
    y = rho * x
    ratios = [B / (B + c) for c in gamma.budgets]
    if any(B - r * (x + y) <= 0 for r in ratios + [pot]):
        return False

    def f(r: Fraction) -> Fraction:
        return r * (B - x) / (B - r * (x + y))

    mixed = sum(prob * f(r) for prob, r in zip(gamma.probabilities, ratios))
    return pot_next >= mixed and mixed >= f(pot) and f(pot) == pot


def potential_ledger_check(B, gamma: BudgetDistribution, eps,
                           rounds: Optional[int] = None) -> LedgerTrace:
    """Replay the worst case where Min buys every round at exactly rho times Max's stake"""
    budget = to_fraction(B)
    eps = to_fraction(eps)
    if not 0 < eps < 1:
        raise GameValidationError(f"eps={eps} outside (0, 1)")
    if budget <= 0:
        raise GameValidationError("ledger check needs a positive budget")
    if rounds is not None and rounds < 0:
        raise GameValidationError("rounds must be non-negative")

    pot = potential(budget, gamma)
    lam = 1 - eps / 2
    rho = 1 / pot - 1
    supports = gamma.budgets
    probs = gamma.probabilities
    bound = round_bound(budget, supports[0], lam, rho)

    requested = rounds if rounds is not None else (bound - 1 if bound else DEFAULT_LEDGER_ROUNDS)
    last = requested if bound is None else min(requested, bound - 1)
    last = max(last, 0)
    logger.debug("Ledger: lambda=%s rho=%s bound=%s checking rounds 0..%d", lam, rho, bound, last)

    rows: List[LedgerRow] = []
    b_i = budget
    c_i = list(supports)
    for i in range(last + 1):
        x_i = eps / 2 * lam ** i * budget
        y_i = rho * x_i
        pot_i = _pot(b_i, c_i, probs)

        p2 = b_i >= lam ** i * budget
        p3 = all(c_now <= c0 - rho * (1 - lam ** i) * budget for c_now, c0 in zip(c_i, supports))
        p4 = pot_i >= pot
        case_one = x_i / (x_i + y_i) == pot
        induction = _pot(b_i - x_i, c_i, probs) >= pot - eps / 2

        b_next = b_i - x_i
        c_next = [c - y_i for c in c_i]
        jensen = None
        if i < last:
            jensen = _convex_step(budget, lam, rho, i, gamma, pot, _pot(b_next, c_next, probs))

        rows.append(LedgerRow(i, b_i, tuple(c_i), x_i, y_i, pot_i,
                              p2, p3, p4, case_one, induction, jensen))
        b_i, c_i = b_next, c_next

    verdict = all(row.holds for row in rows)
    return LedgerTrace(tuple(rows), verdict, bound, lam, rho, pot, eps)
