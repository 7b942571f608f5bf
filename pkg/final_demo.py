#!/usr/bin/env python3
# final_demo.py - Walkthrough of the bowtie numbers with plots saved to output/

import os
import sys
from fractions import Fraction

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src'))

from game_core import bowtie, make_distribution, FIRST_PRICE_POORMAN, ALL_MECHANISMS
from rt_solver import value_curve
from mp_partial_solver import full_info_mp, optimize_partial_value
from potential_ledger import value_gap_report, potential_ledger_check
from sim_engine import MAX_SIDE, RatioPolicy, naive_fully_informed_min, run_play
from discrete_oracle import discrete_minimax
from visualizer import plot_value_curve, draw_game, plot_play
from settings import OUTPUT_DIR

console = Console()


def display_demo_header():
    header = Panel.fit(
        "[bold blue]🎯 BIDDING GAMES WITH HIDDEN BUDGETS[/bold blue]\n"
        "[bold white]Bowtie walkthrough[/bold white]\n"
        "[dim]Max knows his own budget, Min's is drawn from a distribution[/dim]",
        style="bold white on blue"
    )
    console.print(header)


def show_full_information(game):
    table = Table(title="Full-information values at budget ratio r")
    table.add_column("r", style="cyan")
    for mech in ALL_MECHANISMS:
        table.add_column(mech.name, justify="right")
    for r in (0.55, 0.7, 0.9):
        table.add_row(f"{r}", *[f"{full_info_mp(game, mech, r):.4f}" for mech in ALL_MECHANISMS])
    console.print(table)


def show_partial_information(game):
    table = Table(title="Partially informed Max, B = 1, Min budget uniform on {1, C}")
    table.add_column("C", style="cyan")
    table.add_column("Max hides (MP down)", justify="right")
    table.add_column("Min informed (MP up)", justify="right")
    table.add_column("gap", justify="right", style="yellow")
    table.add_column("wallet split", justify="right")
    for c in (2, 3, 5):
        gamma = make_distribution([(1, Fraction(1, 2)), (c, Fraction(1, 2))])
        report = value_gap_report(1, gamma)
        best = optimize_partial_value(game, 1, gamma, FIRST_PRICE_POORMAN)
        table.add_row(str(c), f"{report.mp_down:.5f}", f"{float(report.mp_up):.5f}", f"{report.gap:.5f}",
                      ", ".join(f"{x:.3f}" for x in best.xs))
    console.print(table)


def run_complete_demonstration():
    display_demo_header()
    game = bowtie()
    os.makedirs(OUTPUT_DIR, exist_ok=True)

    console.print("\n[bold cyan]1️⃣  RANDOM-TURN VALUE CURVE...[/bold cyan]")
    curve = value_curve(game)
    files = [draw_game(game, os.path.join(OUTPUT_DIR, 'bowtie.png')),
             plot_value_curve(curve, os.path.join(OUTPUT_DIR, 'bowtie_curve.png'), marks=[1 / 3, 5 / 12])]

    console.print("\n[bold cyan]2️⃣  MECHANISMS UNDER FULL INFORMATION...[/bold cyan]")
    show_full_information(game)

    console.print("\n[bold cyan]3️⃣  HIDDEN BUDGETS AND THE VALUE GAP...[/bold cyan]")
    show_partial_information(game)

    console.print("\n[bold cyan]4️⃣  POTENTIAL LEDGER...[/bold cyan]")
    gamma = make_distribution([(1, Fraction(1, 2)), (2, Fraction(1, 2))])
    trace = potential_ledger_check(1, gamma, Fraction(1, 10))
    status = "[green]holds[/green]" if trace.verdict else "[red]fails[/red]"
    console.print(f"   Ledger over {len(trace.rows)} rounds (bound {trace.round_bound}): {status}")

    console.print("\n[bold cyan]5️⃣  DISCRETE ORACLE BRACKET...[/bold cyan]")
    solution = discrete_minimax(game, FIRST_PRICE_POORMAN, 20, 40, 40)
    lower, upper = solution.root_bracket()
    console.print(f"   20 vs 40 units over 40 rounds: [{lower:.4f}, {upper:.4f}]")

    console.print("\n[bold cyan]6️⃣  SAMPLE PLAY...[/bold cyan]")
    f = RatioPolicy(game, MAX_SIDE, 1, 2)
    g = naive_fully_informed_min(2, 1, game=game)
    record = run_play(game, f, g, Fraction(1), Fraction(2), FIRST_PRICE_POORMAN, 2000)
    files.append(plot_play(record, os.path.join(OUTPUT_DIR, 'bowtie_play.png')))

    console.print(f"\n[bold white]📊 Generated {len(files)} plots:[/bold white]")
    for path in files:
        console.print(f"   ✅ [cyan]{path}[/cyan]")

    console.print(Panel(
        "[bold green]🎉 Walkthrough complete[/bold green]\n\n"
        f"Hiding the budget is worth [yellow]{value_gap_report(1, gamma).gap:.4f}[/yellow] "
        "to Max on the bowtie with C uniform on {1, 2}.",
        title="🎯 Results",
        title_align="center",
        style="bold green"
    ))


if __name__ == "__main__":
    run_complete_demonstration()
