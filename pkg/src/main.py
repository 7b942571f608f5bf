#!/usr/bin/env python3
# src/main.py - Command line interface for the bidding game solvers

import io
import sys
import csv
import json
import logging
import argparse
from fractions import Fraction
from typing import Dict, List, Any, Optional, Sequence

from rich.panel import Panel
from rich.table import Table

from errors import GameValidationError, SolverConvergenceError
from game_core import (Mechanism, FIRST_PRICE_POORMAN, load_game, load_distribution,
                       to_fraction, format_fraction)
from rt_solver import solve_rt_mp, solve_rt_reach, value_curve
from threshold_solver import threshold_reach_richman, qualitative_partial_value, to_signed_payoff
from mp_partial_solver import optimize_partial_value
from potential_ledger import potential, value_gap_report, potential_ledger_check
from sim_engine import (MAX_SIDE, MIN_SIDE, RatioPolicy, ConstantBidStrategy, RandomBidStrategy,
                        run_play, mp_payoff_estimate, export_csv)
from discrete_oracle import discrete_minimax
from settings import (DEFAULT_TOL, DEFAULT_GRID, DEFAULT_SEED, DEFAULT_WINDOW, CURVE_GRID,
                      stderr_console, configure_logging)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED = 0, 1, 2
POLICIES = ('ratio', 'zero', 'random')


class UsageError(Exception):
    """Bad command line; reported with exit code 1"""


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


class BiddingGameAnalyzer:
    def __init__(self, tol: float = DEFAULT_TOL, grid: int = DEFAULT_GRID,
                 seed: int = DEFAULT_SEED, csv_output: bool = False):
        self.console = stderr_console
        self.tol = tol
        self.grid = grid
        self.seed = seed
        self.csv_output = csv_output

    # ------------------------------------------------------------ subcommands

    def solve_rt(self, args) -> Dict[str, Any]:
        game = load_game(args.game)
        p = float(to_fraction(args.p))
        if game.objective == 'mean-payoff':
            value = solve_rt_mp(game, p, self.tol)
            self._summary("Random-turn mean-payoff value", {'p': p, 'value': value})
            return {'objective': game.objective, 'p': p, 'value': value}
        values = solve_rt_reach(game, p)
        self._vertex_table("Random-turn reachability values", values)
        return {'objective': game.objective, 'p': p, 'values': values}

    def threshold(self, args) -> Dict[str, Any]:
        thresholds = threshold_reach_richman(load_game(args.game))
        self._vertex_table("Richman thresholds", thresholds.thresholds)
        return {'thresholds': thresholds.to_dict()}

    def qual_value(self, args) -> Dict[str, Any]:
        th = to_fraction(args.th)
        value = qualitative_partial_value(th, load_distribution(args.beta), load_distribution(args.gamma))
        self._summary("Qualitative value", {'threshold': format_fraction(th), 'value': format_fraction(value)})
        return {'threshold': float(th), 'value': float(value), 'exact': format_fraction(value),
                'signed': float(to_signed_payoff(value))}

    def partial_value(self, args) -> Dict[str, Any]:
        game = load_game(args.game)
        result = optimize_partial_value(game, to_fraction(args.B), load_distribution(args.gamma),
                                        Mechanism.parse(args.mech), self.tol, self.grid)
        self._summary("Partially informed Max", {'value': result.value, 'xs': list(result.xs),
                                                 'tolerance': result.uncertainty})
        return result.to_dict()

    def potential(self, args) -> Dict[str, Any]:
        value = potential(to_fraction(args.B), load_distribution(args.gamma))
        self._summary("Fully informed Min (bowtie)", {'potential': format_fraction(value)})
        return {'value': float(value), 'exact': format_fraction(value)}

    def gap(self, args) -> Dict[str, Any]:
        report = value_gap_report(to_fraction(args.B), load_distribution(args.gamma), self.tol, self.grid)
        self._summary("Value gap on the bowtie", {'mp_down': report.mp_down, 'mp_up': float(report.mp_up),
                                                  'gap': report.gap})
        return report.to_dict()

    def ledger_check(self, args) -> Dict[str, Any]:
        trace = potential_ledger_check(to_fraction(args.B), load_distribution(args.gamma),
                                       to_fraction(args.eps), args.rounds)
        self.console.print(Panel(
            f"{'✅' if trace.verdict else '❌'} Verdict: {trace.verdict}\n"
            f"📐 rho = {format_fraction(trace.rho)}, lambda = {format_fraction(trace.lam)}\n"
            f"🔁 Round bound: {trace.round_bound}\n"
            f"📋 Rows checked: {len(trace.rows)}",
            title="Potential ledger", style="bold"
        ))
        result = trace.to_dict()
        if self.csv_output:
            return self._csv(result['rows'])
        return result

    def simulate(self, args) -> Any:
        game = load_game(args.game)
        mech = Mechanism.parse(args.mech)
        B, C = to_fraction(args.B), to_fraction(args.C)
        f = self._policy(args.max_policy, game, MAX_SIDE, B, C)
        g = self._policy(args.min_policy, game, MIN_SIDE, C, B)
        record = run_play(game, f, g, B, C, mech, args.horizon, args.initial)
        estimate = mp_payoff_estimate(record, args.window)
        self._summary("Simulated play", {'rounds': record.round, 'Max wins': record.wins(MAX_SIDE),
                                         'trailing payoff': estimate.trailing, 'full payoff': estimate.full})
        if self.csv_output:
            buffer = io.StringIO()
            export_csv(record, buffer)
            return buffer.getvalue()
        return {
            'mechanism': mech.name,
            'rounds': record.round,
            'wins_max': record.wins(MAX_SIDE),
            'trailing': estimate.trailing,
            'full': estimate.full,
            'window': estimate.window,
            'budget_max': float(record.budget_max),
            'budget_min': float(record.budget_min)
        }

    def oracle(self, args) -> Any:
        game = load_game(args.game)
        units_min = args.units if args.units_min is None else args.units_min
        solution = discrete_minimax(game, Mechanism.parse(args.mech), args.units, units_min,
                                    args.horizon, exhaustive=args.exhaustive)
        result = solution.to_dict()
        table = Table(title=f"Oracle brackets, horizon {args.horizon}")
        table.add_column("Vertex", style="cyan")
        table.add_column("Lower", style="green")
        table.add_column("Upper", style="yellow")
        for vid, bracket in result['values'].items():
            table.add_row(vid, f"{bracket['lower']:.6f}", f"{bracket['upper']:.6f}")
        self.console.print(table)
        if self.csv_output:
            return self._csv([{'vertex': s.vertex, 'units_max': s.units_max, 'units_min': s.units_min,
                               'lower': lo, 'upper': hi} for s, lo, hi in solution.iter_states()])
        return result

    def curve(self, args) -> Any:
        game = load_game(args.game)
        game.require_objective('mean-payoff')
        curve = value_curve(game, args.points, self.tol)
        if args.plot:
            from visualizer import plot_value_curve
            plot_value_curve(curve, args.plot)
            self.console.print(f"📊 Value curve saved to: {args.plot}")
        if self.csv_output:
            return self._csv([{'p': p, 'value': v} for p, v in zip(curve.grid, curve.values)])
        return curve.to_dict()

    # ------------------------------------------------------------ helpers

    def _policy(self, kind: str, game, side: str, own: Fraction, opponent: Fraction):
        if kind == 'ratio':
            return RatioPolicy(game, side, own, opponent)
        if kind == 'random':
            return RandomBidStrategy(game, side, self.seed if side == MAX_SIDE else self.seed + 1)
        return ConstantBidStrategy(game, side, Fraction(0))

    def _summary(self, title: str, fields: Dict[str, Any]) -> None:
        table = Table(title=title)
        table.add_column("Metric", style="cyan")
        table.add_column("Value", style="green")
        for key, value in fields.items():
            table.add_row(key, f"{value:.10g}" if isinstance(value, float) else str(value))
        self.console.print(table)

    def _vertex_table(self, title: str, values: Dict[str, float]) -> None:
        self._summary(title, dict(values))

    @staticmethod
    def _csv(rows: List[Dict[str, Any]]) -> str:
        buffer = io.StringIO()
        if rows:
            writer = csv.DictWriter(buffer, fieldnames=list(rows[0]))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: (json.dumps(v) if isinstance(v, list) else v) for k, v in row.items()})
        return buffer.getvalue()


def build_parser() -> CliParser:
    common = CliParser(add_help=False)
    common.add_argument('--tol', type=float, default=DEFAULT_TOL, help='Solver tolerance')
    common.add_argument('--grid', type=int, default=DEFAULT_GRID, help='Optimizer grid points')
    common.add_argument('--seed', type=int, default=DEFAULT_SEED, help='Seed for random policies')
    common.add_argument('--verbose', action='store_true', help='Debug logging on stderr')
    common.add_argument('--csv', action='store_true', help='Emit tabular outputs as CSV')

    parser = CliParser(prog='bidgame', description='Bidding games with partially observed budgets')
    sub = parser.add_subparsers(dest='command', required=True)

    def command(name: str, help_text: str) -> CliParser:
        return sub.add_parser(name, parents=[common], help=help_text)

    p = command('solve-rt', 'Value of the random-turn game at bias p')
    p.add_argument('--game', required=True)
    p.add_argument('--p', required=True)

    p = command('threshold', 'Richman reachability thresholds')
    p.add_argument('--game', required=True)

    p = command('qual-value', 'Qualitative value with partially informed Max')
    p.add_argument('--th', required=True)
    p.add_argument('--beta', required=True)
    p.add_argument('--gamma', required=True)

    p = command('partial-value', 'Mean-payoff value with partially informed Max')
    p.add_argument('--game', required=True)
    p.add_argument('--B', required=True)
    p.add_argument('--gamma', required=True)
    p.add_argument('--mech', default=FIRST_PRICE_POORMAN.name)

    for name, help_text in (('potential', 'Fully informed Min value on the bowtie'),
                            ('gap', 'Value gap between the two information orders on the bowtie')):
        p = command(name, help_text)
        p.add_argument('--B', required=True)
        p.add_argument('--gamma', required=True)

    p = command('ledger-check', 'Replay the potential ledger round by round')
    p.add_argument('--B', required=True)
    p.add_argument('--gamma', required=True)
    p.add_argument('--eps', required=True)
    p.add_argument('--rounds', type=int, default=None)

    p = command('simulate', 'Simulate one play')
    p.add_argument('--game', required=True)
    p.add_argument('--mech', default=FIRST_PRICE_POORMAN.name)
    p.add_argument('--B', default='1')
    p.add_argument('--C', default='1')
    p.add_argument('--horizon', type=int, default=1000)
    p.add_argument('--window', type=float, default=DEFAULT_WINDOW)
    p.add_argument('--initial', default=None, help='Initial vertex (default: first declared)')
    p.add_argument('--max-policy', choices=POLICIES, default='ratio')
    p.add_argument('--min-policy', choices=POLICIES, default='ratio')

    p = command('oracle', 'Discrete backward-induction brackets')
    p.add_argument('--game', required=True)
    p.add_argument('--mech', default=FIRST_PRICE_POORMAN.name)
    p.add_argument('--units', type=int, required=True, help="Max's budget in units")
    p.add_argument('--units-min', type=int, default=None, help="Min's budget in units (default: --units)")
    p.add_argument('--horizon', type=int, required=True)
    p.add_argument('--exhaustive', action='store_true')

    p = command('curve', 'Sampled value curve p -> MP(RT(G, p))')
    p.add_argument('--game', required=True)
    p.add_argument('--points', type=int, default=CURVE_GRID)
    p.add_argument('--plot', default=None, help='Save a plot to this path')
    return parser


HANDLERS = {
    'solve-rt': BiddingGameAnalyzer.solve_rt,
    'threshold': BiddingGameAnalyzer.threshold,
    'qual-value': BiddingGameAnalyzer.qual_value,
    'partial-value': BiddingGameAnalyzer.partial_value,
    'potential': BiddingGameAnalyzer.potential,
    'gap': BiddingGameAnalyzer.gap,
    'ledger-check': BiddingGameAnalyzer.ledger_check,
    'simulate': BiddingGameAnalyzer.simulate,
    'oracle': BiddingGameAnalyzer.oracle,
    'curve': BiddingGameAnalyzer.curve,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the process exit code"""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        stderr_console.print(f"❌ {exc}")
        return EXIT_INVALID
    except SystemExit as exc:
        return int(exc.code or 0)

    configure_logging(args.verbose)
    analyzer = BiddingGameAnalyzer(args.tol, args.grid, args.seed, args.csv)
    try:
        result = HANDLERS[args.command](analyzer, args)
    except SolverConvergenceError as exc:
        stderr_console.print(f"❌ Solver did not converge: {exc}")
        return EXIT_DIVERGED
    except (GameValidationError, FileNotFoundError) as exc:
        stderr_console.print(f"❌ {exc}")
        return EXIT_INVALID

    if isinstance(result, str):
        sys.stdout.write(result)
    else:
        sys.stdout.write(json.dumps(result, indent=2) + '\n')
    return EXIT_OK


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
