# src/rt_solver.py - Random-turn games: construction, mean-payoff and reachability values

import logging
from dataclasses import dataclass
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Tuple, Optional, Sequence

import networkx as nx
import numpy as np

from errors import GameValidationError, SolverConvergenceError
from game_core import GameGraph
from settings import DEFAULT_TOL, REACH_TOL, ITERATION_CAP, CURVE_GRID, worker_count

logger = logging.getLogger(__name__)

NATURE, MAX, MIN = 'nature', 'max', 'min'
DAMPING = 0.5
SWITCH_TOL = 1e-10
STRATEGY_ROUNDS = 10_000


def _check_bias(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise GameValidationError(f"bias p={p} outside [0, 1]")
    return float(p)


@dataclass(frozen=True)
class StochasticGame:
    """RT(G, p): vertex v becomes nature 3i, Max copy 3i+1 and Min copy 3i+2"""
    source: GameGraph
    p: float
    owners: Tuple[str, ...]
    weights: Tuple[Fraction, ...]
    edges: Tuple[Tuple[int, int, Optional[float]], ...]

    @property
    def num_vertices(self) -> int:
        return len(self.owners)

    def label(self, index: int) -> str:
        suffix = {NATURE: 'N', MAX: '1', MIN: '2'}[self.owners[index]]
        return f"{self.source.ids[index // 3]}_{suffix}"

    def out_edges(self, index: int) -> List[Tuple[int, Optional[float]]]:
        return [(dst, prob) for src, dst, prob in self.edges if src == index]


def build_rt(game: GameGraph, p: float) -> StochasticGame:
    """Replace every vertex by a coin toss followed by a Max or Min move"""
    p = _check_bias(p)
    owners: List[str] = []
    weights: List[Fraction] = []
    edges: List[Tuple[int, int, Optional[float]]] = []

    for i, vertex in enumerate(game.vertices):
        owners.extend([NATURE, MAX, MIN])
        weights.extend([vertex.weight] * 3)
        edges.append((3 * i, 3 * i + 1, p))
        edges.append((3 * i, 3 * i + 2, 1.0 - p))
        for j in game.successors[i]:
            edges.append((3 * i + 1, 3 * j, None))
            edges.append((3 * i + 2, 3 * j, None))

    return StochasticGame(game, p, tuple(owners), tuple(weights), tuple(edges))


# ---------------------------------------------------------------- deterministic limits

def _karp_min_mean(weights: Sequence[Fraction], successors: Sequence[Sequence[int]]) -> Fraction:
    """Minimum cycle mean with vertex weights, walks may start anywhere"""
    n = len(weights)
    predecessors: List[List[int]] = [[] for _ in range(n)]
    for u, succ in enumerate(successors):
        for v in succ:
            predecessors[v].append(u)

    table: List[List[Optional[Fraction]]] = [[Fraction(0)] * n]
    for _ in range(n):
        prev = table[-1]
        row: List[Optional[Fraction]] = []
        for v in range(n):
            candidates = [prev[u] + weights[u] for u in predecessors[v] if prev[u] is not None]
            row.append(min(candidates) if candidates else None)
        table.append(row)

    best: Optional[Fraction] = None
    for v in range(n):
        if table[n][v] is None:
            continue
        worst = max(
            (table[n][v] - table[k][v]) / (n - k)
            for k in range(n) if table[k][v] is not None
        )
        best = worst if best is None else min(best, worst)
    if best is None:
        raise GameValidationError("graph has no cycle")
    return best


def min_cycle_mean(game: GameGraph) -> Fraction:
    """Mean payoff when Min controls every move"""
    return _karp_min_mean([v.weight for v in game.vertices], game.successors)


def max_cycle_mean(game: GameGraph) -> Fraction:
    """Mean payoff when Max controls every move"""
    return -_karp_min_mean([-v.weight for v in game.vertices], game.successors)


# ---------------------------------------------------------------- mean payoff

def _padded_successors(game: GameGraph) -> np.ndarray:
    width = max(len(s) for s in game.successors)
    return np.array([list(s) + [s[0]] * (width - len(s)) for s in game.successors], dtype=np.intp)


def _shapley(h: np.ndarray, weights: np.ndarray, succ: np.ndarray, p: float) -> np.ndarray:
    values = h[succ]
    return weights + p * values.max(axis=1) + (1.0 - p) * values.min(axis=1)


def _relative_value_iteration(game: GameGraph, p: float, tol: float,
                              max_iter: int) -> Tuple[float, np.ndarray]:
    """Damped relative value iteration; returns (gain, bias) or raises on the cap"""
    weights = game.weights
    succ = _padded_successors(game)
    h = np.zeros(game.n)
    residual = float('inf')

    for iteration in range(1, max_iter + 1):
        diff = _shapley(h, weights, succ, p) - h
        lo, hi = float(diff.min()), float(diff.max())
        residual = hi - lo
        if residual < tol:
            logger.debug("RT(p=%.6g) converged after %d sweeps, span %.3e", p, iteration, residual)
            return 0.5 * (lo + hi), h
        h = h + DAMPING * diff
        h -= h[0]

    raise SolverConvergenceError("relative value iteration hit the iteration cap", residual, max_iter)


def _closed_classes(transition: np.ndarray) -> List[List[int]]:
    """Recurrent classes of a Markov chain: the sink components of its support graph"""
    graph = nx.DiGraph()
    graph.add_nodes_from(range(len(transition)))
    rows, cols = np.nonzero(transition > 0.0)
    graph.add_edges_from(zip(rows.tolist(), cols.tolist()))
    condensed = nx.condensation(graph)
    return [sorted(condensed.nodes[c]['members']) for c in condensed if condensed.out_degree(c) == 0]


def _evaluate_chain(transition: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Gain and bias of a possibly multichain Markov reward process

    Each closed class gets its stationary mean reward, transient states inherit the
    absorption-weighted gain, and the bias solves (I - P) h = w - g with h pinned to
    zero at one state per class.
    """
    n = len(weights)
    classes = _closed_classes(transition)
    gain = np.zeros(n)
    recurrent = np.zeros(n, dtype=bool)

    for members in classes:
        k = len(members)
        system = transition[np.ix_(members, members)].T - np.eye(k)
        system[-1, :] = 1.0
        rhs = np.zeros(k)
        rhs[-1] = 1.0
        stationary = np.linalg.solve(system, rhs)
        gain[members] = float(stationary @ weights[members])
        recurrent[members] = True

    transient = np.flatnonzero(~recurrent)
    if transient.size:
        closed = np.flatnonzero(recurrent)
        leave = np.eye(transient.size) - transition[np.ix_(transient, transient)]
        gain[transient] = np.linalg.solve(leave, transition[np.ix_(transient, closed)] @ gain[closed])

    anchors = np.zeros((len(classes), n))
    for k, members in enumerate(classes):
        anchors[k, members[0]] = 1.0
    system = np.vstack([np.eye(n) - transition, anchors])
    rhs = np.concatenate([weights - gain, np.zeros(len(classes))])
    bias = np.linalg.lstsq(system, rhs, rcond=None)[0]
    return gain, bias


def _chain(n: int, sigma: Sequence[int], tau: Sequence[int], p: float) -> np.ndarray:
    transition = np.zeros((n, n))
    for v in range(n):
        transition[v, sigma[v]] += p
        transition[v, tau[v]] += 1.0 - p
    return transition


def _improve(choice: List[int], successors: Sequence[Sequence[int]], gain: np.ndarray,
             bias: np.ndarray, sign: float) -> bool:
    """Howard switch: better gain first, then better bias; only strict gains move"""
    changed = False
    for v, succ in enumerate(successors):
        best = choice[v]
        for u in succ:
            dg = sign * (gain[u] - gain[best])
            if dg > SWITCH_TOL or (abs(dg) <= SWITCH_TOL and sign * (bias[u] - bias[best]) > SWITCH_TOL):
                best = u
        if best != choice[v]:
            choice[v] = best
            changed = True
    return changed


def _strategy_iteration(game: GameGraph, p: float, max_rounds: int = STRATEGY_ROUNDS
                        ) -> Tuple[np.ndarray, np.ndarray, List[int], List[int]]:
    """Hoffman-Karp: improve Max's positional strategy against Min's exact best response

    Returns (gain, bias, sigma, tau); sigma and tau map a vertex index to a successor index.
    """
    n = game.n
    weights = game.weights
    successors = game.successors
    sigma = [max(s, key=lambda u: weights[u]) for s in successors]
    tau = [min(s, key=lambda u: weights[u]) for s in successors]

    for outer in range(1, max_rounds + 1):
        for _ in range(max_rounds):
            gain, bias = _evaluate_chain(_chain(n, sigma, tau, p), weights)
            if not _improve(tau, successors, gain, bias, -1.0):
                break
        else:
            raise SolverConvergenceError("Min best response did not settle", float('nan'), max_rounds)

        if not _improve(sigma, successors, gain, bias, 1.0):
            logger.debug("Strategy iteration at p=%.6g settled after %d rounds", p, outer)
            return gain, bias, sigma, tau

    raise SolverConvergenceError("strategy iteration hit the round cap", float('nan'), max_rounds)


def solve_rt_mp(game: GameGraph, p: float, tol: float = DEFAULT_TOL,
                max_iter: int = ITERATION_CAP) -> float:
    """Mean-payoff value of RT(G, p), uniform over initial vertices"""
    p = _check_bias(p)
    game.require_objective('mean-payoff')
    if tol <= 0:
        raise GameValidationError("tol must be positive")

    if p == 0.0:
        return float(min_cycle_mean(game))
    if p == 1.0:
        return float(max_cycle_mean(game))

    try:
        gain, _ = _relative_value_iteration(game, p, tol, max_iter)
        return gain
    except SolverConvergenceError as exc:
        logger.warning("RT(p=%.6g): %s, switching to strategy iteration", p, exc)
        gain, _, _, _ = _strategy_iteration(game, p)
        return float(gain.mean())


def rt_positional_choices(game: GameGraph, p: float,
                          tol: float = DEFAULT_TOL) -> Tuple[Dict[str, str], Dict[str, str]]:
    """Optimal successor per vertex for Max and for Min in RT(G, p)"""
    p = _check_bias(p)
    try:
        _, h = _relative_value_iteration(game, p, tol, ITERATION_CAP)
    except SolverConvergenceError as exc:
        logger.warning("Reading moves off strategy iteration: %s", exc)
        _, _, sigma, tau = _strategy_iteration(game, p)
        return ({vid: game.ids[sigma[i]] for i, vid in enumerate(game.ids)},
                {vid: game.ids[tau[i]] for i, vid in enumerate(game.ids)})

    max_moves, min_moves = {}, {}
    for i, vid in enumerate(game.ids):
        succ = game.successors[i]
        values = h[list(succ)]
        max_moves[vid] = game.ids[succ[int(np.argmax(values))]]
        min_moves[vid] = game.ids[succ[int(np.argmin(values))]]
    return max_moves, min_moves


# ---------------------------------------------------------------- reachability

def solve_rt_reach(game: GameGraph, p: float, tol: float = REACH_TOL,
                   max_iter: int = ITERATION_CAP) -> Dict[str, float]:
    """Probability of reaching a target in RT(G, p), least fixpoint from zero"""
    p = _check_bias(p)
    game.require_objective('reachability')

    succ = _padded_successors(game)
    is_target = np.array([v.is_target for v in game.vertices])
    values = is_target.astype(float)

    for iteration in range(1, max_iter + 1):
        successor_values = values[succ]
        updated = p * successor_values.max(axis=1) + (1.0 - p) * successor_values.min(axis=1)
        updated[is_target] = 1.0
        residual = float(np.abs(updated - values).max())
        values = updated
        if residual < tol:
            logger.debug("Reachability p=%.6g converged after %d sweeps", p, iteration)
            return {vid: float(values[i]) for i, vid in enumerate(game.ids)}

    raise SolverConvergenceError("reachability value iteration hit the iteration cap", residual, max_iter)


# ---------------------------------------------------------------- value curves

@dataclass(frozen=True)
class ValueCurve:
    """p -> MP(RT(G, p)) by monotone piecewise-linear interpolation"""
    grid: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        if len(self.grid) < 2 or len(self.grid) != len(self.values):
            raise GameValidationError("value curve needs matching grids of length >= 2")

    def __call__(self, p):
        result = np.interp(p, self.grid, self.values)
        return float(result) if np.ndim(result) == 0 else result

    def to_dict(self):
        return {'grid': list(self.grid), 'values': list(self.values)}


def closed_form_curve(game: GameGraph) -> ValueCurve:
    """Two-vertex complete games: Max heads for the heavier vertex, Min for the lighter"""
    w_lo, w_hi = sorted(float(v.weight) for v in game.vertices)
    return ValueCurve((0.0, 1.0), (w_lo, w_hi))


def _evaluate(game: GameGraph, biases: Sequence[float], tol: float) -> List[float]:
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        return list(pool.map(lambda p: solve_rt_mp(game, p, tol), biases))


def value_curve(game: GameGraph, grid_size: int = CURVE_GRID, tol: float = DEFAULT_TOL,
                refinements: int = 2) -> ValueCurve:
    """Sampled value curve, refined where it is steep and clamped to be non-decreasing"""
    if grid_size < 2:
        raise GameValidationError("grid_size must be at least 2")

    grid = [float(p) for p in np.linspace(0.0, 1.0, grid_size)]
    values = _evaluate(game, grid, tol)

    for _ in range(refinements):
        spread = max(values) - min(values)
        if spread <= tol:
            break
        limit = 2.0 * spread / (grid_size - 1)
        midpoints = [0.5 * (grid[k] + grid[k + 1]) for k in range(len(grid) - 1)
                     if abs(values[k + 1] - values[k]) > limit]
        if not midpoints:
            break
        logger.debug("Refining value curve at %d midpoints", len(midpoints))
        merged = sorted(zip(grid + midpoints, values + _evaluate(game, midpoints, tol)))
        grid = [p for p, _ in merged]
        values = [v for _, v in merged]

    raw = np.array(values)
    clamped = np.maximum.accumulate(raw)
    drop = float((clamped - raw).max())
    if drop > 2 * tol:
        logger.warning("Value curve dropped by %.3e before clamping", drop)
    return ValueCurve(tuple(grid), tuple(float(v) for v in clamped))
