# src/errors.py - Exception hierarchy shared by solvers and the CLI


class GameValidationError(ValueError):
    """Invalid game, distribution, mechanism or solver argument"""


class IllegalBidError(GameValidationError):
    """A strategy bid outside [0, available budget]"""

    def __init__(self, side: str, round_index: int, bid, budget):
        self.side = side
        self.round = round_index
        self.bid = bid
        self.budget = budget
        super().__init__(
            f"{side} bid {float(bid):.6g} with available budget {float(budget):.6g} in round {round_index}"
        )


class IllegalMoveError(GameValidationError):
    """A strategy chose a vertex that is not a successor of the current one"""

    def __init__(self, side: str, round_index: int, vertex: str, successor: str):
        self.side = side
        self.round = round_index
        self.vertex = vertex
        self.successor = successor
        super().__init__(
            f"{side} moved {vertex!r} -> {successor!r} in round {round_index}, which is not an edge"
        )


class OracleCapacityError(GameValidationError):
    """Discrete oracle instance above the desk-scale caps"""


class GranularityError(GameValidationError):
    """Fixed strategy cannot be replayed at the oracle's unit granularity"""


class SolverConvergenceError(RuntimeError):
    """Iterative solver stopped at its cap without meeting the tolerance"""

    def __init__(self, message: str, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
