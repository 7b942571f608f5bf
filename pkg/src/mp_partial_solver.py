# src/mp_partial_solver.py - Mean-payoff values with a partially informed Max
#
# Max splits his budget B into cumulative wallet cut-points x_1 <= ... <= x_n = B,
# wallet i being spent against the slice C_i - C_{i-1} of Min's possible budgets.
# A split is admissible when the per-wallet values p_i are non-increasing.

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Any, Optional, Sequence, Tuple

import numpy as np

from errors import GameValidationError
from game_core import (GameGraph, Mechanism, BudgetDistribution, PriceRule,
                       is_two_vertex_complete, to_fraction)
from rt_solver import ValueCurve, solve_rt_mp, value_curve, closed_form_curve
from settings import DEFAULT_TOL, DEFAULT_GRID, ADMISSIBILITY_BAND, CURVE_GRID

logger = logging.getLogger(__name__)

Curve = Callable[[float], float]

SEQUENCE_TOL = 1e-12
REFINE_POINTS = 64
REFINE_PASSES = 2
SHARPEN_PASSES = 4
SHARPEN_SPLIT = 16


def full_info_mp(game: GameGraph, mech: Mechanism, r, tol: float = DEFAULT_TOL) -> float:
    """Full-information mean-payoff value at initial ratio r"""
    r = float(r)
    if not 0.0 < r < 1.0:
        raise GameValidationError(f"ratio r={r} outside (0, 1)")

    if mech.price_rule is PriceRule.FIRST_PRICE:
        bias = r if mech.is_poorman else 0.5
    elif mech.is_poorman:
        bias = (2 * r - 1) / r if r > 0.5 else 0.0
    else:
        # pure strategies cannot secure more than the Min-controlled floor
        bias = 0.0
    return solve_rt_mp(game, bias, tol)


class ExactCurve:
    """p -> MP(RT(G, p)) evaluated by the solver, memoized per bias"""

    def __init__(self, game: GameGraph, tol: float = DEFAULT_TOL):
        self.game = game
        self.tol = tol
        self._cache: Dict[float, float] = {}

    def __call__(self, p: float) -> float:
        key = float(p)
        if key not in self._cache:
            self._cache[key] = solve_rt_mp(self.game, key, self.tol)
        return self._cache[key]


def exact_curve(game: GameGraph, tol: float = DEFAULT_TOL) -> ExactCurve:
    return ExactCurve(game, tol)


@lru_cache(maxsize=32)
def default_curve(game: GameGraph) -> ValueCurve:
    if is_two_vertex_complete(game):
        return closed_form_curve(game)
    return value_curve(game, CURVE_GRID)


@dataclass(frozen=True)
class AdmissibilityReport:
    xs: Tuple[float, ...]
    biases: Tuple[float, ...]
    ps: Tuple[float, ...]
    val: float
    admissible: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'xs': list(self.xs),
            'biases': list(self.biases),
            'ps': list(self.ps),
            'value': self.val,
            'admissible': self.admissible
        }


def _require_poorman(mech: Mechanism) -> None:
    if not mech.is_poorman:
        raise GameValidationError(f"partial-information values need a poorman mechanism, got {mech}")


def _segment_bias(dx: float, dc: float, price_rule: PriceRule) -> float:
    if price_rule is PriceRule.FIRST_PRICE:
        return dx / (dx + dc) if dx + dc > 0 else 0.0
    return 1.0 - dc / dx if dx > dc else 0.0


def _bias_matrix(left: np.ndarray, right: np.ndarray, dc: float, price_rule: PriceRule) -> np.ndarray:
    """Bias for every (x_{i-1}, x_i) pair; NaN where x_i < x_{i-1}"""
    dx = right[None, :] - left[:, None]
    with np.errstate(divide='ignore', invalid='ignore'):
        if price_rule is PriceRule.FIRST_PRICE:
            bias = np.where(dx + dc > 0, dx / (dx + dc), 0.0)
        else:
            bias = np.where(dx > dc, 1.0 - dc / dx, 0.0)
    return np.where(dx >= 0, bias, np.nan)


def val_of_sequence(curve: Curve, xs: Sequence, B, gamma: BudgetDistribution,
                    mech: Mechanism) -> AdmissibilityReport:
    """Value and admissibility of a cumulative wallet split"""
    _require_poorman(mech)
    xs = [float(x) for x in xs]
    budget = float(B)
    if len(xs) != len(gamma):
        raise GameValidationError(f"need {len(gamma)} cut-points, got {len(xs)}")
    if xs[0] < -SEQUENCE_TOL or any(b < a - SEQUENCE_TOL for a, b in zip(xs, xs[1:])):
        raise GameValidationError(f"cut-points must be non-negative and non-decreasing: {xs}")
    if abs(xs[-1] - budget) > SEQUENCE_TOL:
        raise GameValidationError(f"last cut-point {xs[-1]} must equal the budget {budget}")

    cs = [0.0] + [float(c) for c in gamma.budgets]
    probs = [float(p) for p in gamma.probabilities]
    previous = [0.0] + xs[:-1]

    biases = tuple(
        _segment_bias(max(0.0, x - x_prev), cs[i + 1] - cs[i], mech.price_rule)
        for i, (x_prev, x) in enumerate(zip(previous, xs))
    )
    ps = tuple(float(curve(b)) for b in biases)
    val = sum(prob * p for prob, p in zip(probs, ps))
    admissible = all(a >= b - ADMISSIBILITY_BAND for a, b in zip(ps, ps[1:]))
    return AdmissibilityReport(tuple(xs), biases, ps, float(val), admissible)


@dataclass(frozen=True)
class PartialValueResult:
    value: float
    xs: Tuple[float, ...]
    report: AdmissibilityReport
    uncertainty: float

    def to_dict(self) -> Dict[str, Any]:
        result = self.report.to_dict()
        result['value'] = self.value
        result['tolerance'] = self.uncertainty
        return result


def _dp_over_grid(grid: np.ndarray, curve: ValueCurve, gamma: BudgetDistribution,
                  price_rule: PriceRule) -> Tuple[float, List[int]]:
    """Best admissible split with every cut-point on the grid; returns (value, indices)"""
    m = len(grid)
    cs = [0.0] + [float(c) for c in gamma.budgets]
    probs = [float(p) for p in gamma.probabilities]
    n = len(probs)
    last = m - 1

    # state (a, b): x_{i-1} = grid[a], x_i = grid[b]; row a = 0 is x_0 = 0
    ps_prev = curve(_bias_matrix(grid[:1], grid, cs[1] - cs[0], price_rule))
    score = np.full((m, m), -np.inf)
    score[0, :] = probs[0] * ps_prev[0]
    p_table = np.full((m, m), np.nan)
    p_table[0, :] = ps_prev[0]
    back: List[np.ndarray] = []

    for i in range(1, n):
        bias = _bias_matrix(grid, grid, cs[i + 1] - cs[i], price_rule)
        valid = ~np.isnan(bias)
        p_next = np.where(valid, curve(np.nan_to_num(bias)), np.nan)
        new_score = np.full((m, m), -np.inf)
        pred = np.full((m, m), -1, dtype=np.intp)

        for a in range(m):
            # predecessors c reaching x_{i-1} = grid[a]
            column_scores = score[:, a]
            alive = np.isfinite(column_scores)
            if not alive.any():
                continue
            cands = np.flatnonzero(alive)
            order = cands[np.argsort(-p_table[cands, a], kind='stable')]
            p_sorted = p_table[order, a]
            prefix = np.maximum.accumulate(column_scores[order])
            prefix_arg = order[_running_argmax(column_scores[order])]

            row = p_next[a]
            ok = ~np.isnan(row)
            # admissible predecessors have p_{i-1} >= p_i - band: a prefix of p_sorted
            count = np.searchsorted(-p_sorted, -(row[ok] - ADMISSIBILITY_BAND), side='right')
            has = count > 0
            targets = np.flatnonzero(ok)[has]
            new_score[a, targets] = prefix[count[has] - 1] + probs[i] * row[targets]
            pred[a, targets] = prefix_arg[count[has] - 1]

        back.append(pred)
        score = new_score
        p_table = p_next

    finals = score[:, last]
    a = int(np.argmax(finals))
    best = float(finals[a])
    if not np.isfinite(best):
        raise GameValidationError("no admissible split on the grid")

    indices = [last]
    b = last
    for pred in reversed(back):
        c = int(pred[a, b])
        indices.append(a)
        a, b = c, a
    indices.reverse()
    return best, indices


def _running_argmax(values: np.ndarray) -> np.ndarray:
    """Index of the first maximum within every prefix"""
    prefix = np.maximum.accumulate(values)
    is_new = np.concatenate(([True], values[1:] > prefix[:-1]))
    positions = np.where(is_new, np.arange(len(values)), 0)
    return np.maximum.accumulate(positions)


def _refined_grid(base: np.ndarray, xs: Sequence[float], step: float, budget: float) -> np.ndarray:
    windows = [np.linspace(x - 2 * step, x + 2 * step, REFINE_POINTS + 1) for x in xs]
    merged = np.concatenate([base] + windows)
    return np.unique(np.clip(merged, 0.0, budget))


def _grid_uncertainty(curve: Curve, grid: np.ndarray, indices: List[int], B: float,
                      gamma: BudgetDistribution, mech: Mechanism, value: float) -> float:
    """Largest value change from nudging one interior cut-point to a neighbouring grid point"""
    spread = 0.0
    for k in range(len(indices) - 1):
        for shift in (-1, 1):
            moved = list(indices)
            moved[k] = min(max(moved[k] + shift, 0), len(grid) - 1)
            xs = [float(grid[j]) for j in moved]
            if any(b < a for a, b in zip(xs, xs[1:])):
                continue
            report = val_of_sequence(curve, xs, B, gamma, mech)
            spread = max(spread, abs(report.val - value))
    return spread


def _search_splits(curve: Curve, budget: float, gamma: BudgetDistribution, mech: Mechanism,
                   grid_points: int) -> Tuple[np.ndarray, List[int]]:
    """Coarse DP over an even budget grid, then DP again on windows around the incumbent"""
    grid = np.unique(np.linspace(0.0, budget, grid_points + 1))
    step = budget / grid_points if budget > 0 else 0.0
    value, indices = _dp_over_grid(grid, curve, gamma, mech.price_rule)
    logger.debug("Coarse split %s -> %.10f", [grid[j] for j in indices], value)

    for _ in range(REFINE_PASSES):
        if step == 0.0:
            break
        interior = [float(grid[j]) for j in indices[:-1]]
        grid = _refined_grid(grid, interior, step, budget)
        step = 4 * step / REFINE_POINTS
        value, indices = _dp_over_grid(grid, curve, gamma, mech.price_rule)
    return grid, indices


def _local_spread(curve: ValueCurve, bias: float) -> float:
    """Rise of the sampled curve across the nodes bracketing a bias"""
    grid = np.asarray(curve.grid)
    values = np.asarray(curve.values)
    lo = max(int(np.searchsorted(grid, bias, side='left')) - 1, 0)
    hi = min(int(np.searchsorted(grid, bias, side='right')), len(grid) - 1)
    return float(values[hi] - values[lo])


def _sharpen_curve(curve: ValueCurve, exact: ExactCurve, biases: Sequence[float]) -> ValueCurve:
    """Add solver samples at the given biases and just beside them"""
    grid = np.asarray(curve.grid)
    extra = set()
    for b in biases:
        k = min(max(int(np.searchsorted(grid, b)), 1), len(grid) - 1)
        h = (grid[k] - grid[k - 1]) / SHARPEN_SPLIT
        extra.update(float(np.clip(q, 0.0, 1.0)) for q in (b - h, b, b + h))
    fresh = sorted(extra.difference(curve.grid))
    if not fresh:
        return curve
    merged = sorted(zip(list(curve.grid) + fresh, list(curve.values) + [exact(q) for q in fresh]))
    values = np.maximum.accumulate([v for _, v in merged])
    return ValueCurve(tuple(p for p, _ in merged), tuple(float(v) for v in values))


def optimize_partial_value(game: GameGraph, B, gamma: BudgetDistribution, mech: Mechanism,
                           tol: float = DEFAULT_TOL, grid_points: int = DEFAULT_GRID,
                           curve: Optional[ValueCurve] = None) -> PartialValueResult:
    """Max over admissible splits of the expected wallet value

    On games without a closed-form curve the sampled curve is sharpened with solver values
    at the incumbent's wallet biases until interpolation there agrees with the solver, and
    the reported value is evaluated by the solver itself.
    """
    _require_poorman(mech)
    game.require_objective('mean-payoff')
    budget = float(to_fraction(B))
    if budget < 0:
        raise GameValidationError("budget must be non-negative")

    sampled = curve is None and not is_two_vertex_complete(game)
    curve = curve if curve is not None else default_curve(game)
    exact = exact_curve(game, tol) if sampled else None

    if len(gamma) == 1:
        report = val_of_sequence(exact if exact is not None else curve, [budget], budget, gamma, mech)
        return PartialValueResult(report.val, report.xs, report, tol)

    interpolation = 0.0
    for sharpen in range(SHARPEN_PASSES + 1):
        grid, indices = _search_splits(curve, budget, gamma, mech, grid_points)
        xs = [float(grid[j]) for j in indices]
        xs[-1] = budget
        report = val_of_sequence(curve, xs, budget, gamma, mech)
        if exact is None:
            break
        probs = [float(p) for p in gamma.probabilities]
        drift = max(abs(p - exact(b)) for p, b in zip(report.ps, report.biases))
        interpolation = sum(prob * _local_spread(curve, b) for prob, b in zip(probs, report.biases))
        logger.debug("Sharpen pass %d: drift %.3e, local spread %.3e", sharpen, drift, interpolation)
        if drift <= tol or sharpen == SHARPEN_PASSES:
            interpolation = max(interpolation, drift)
            break
        curve = _sharpen_curve(curve, exact, report.biases)

    spread = _grid_uncertainty(curve, grid, indices, budget, gamma, mech, report.val)
    uncertainty = max(tol, interpolation, spread)
    if exact is not None:
        report = val_of_sequence(exact, xs, budget, gamma, mech)
        if not report.admissible:
            logger.warning("Split %s is only admissible up to %.2e on the solver curve", xs, uncertainty)
    logger.info("Partial value %.10f at xs=%s (+/- %.2e)", report.val, xs, uncertainty)
    return PartialValueResult(report.val, tuple(xs), report, uncertainty)
