# src/visualizer.py - Plots for value curves, game graphs and play transcripts

import os
import logging
from typing import Optional, Sequence

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import matplotlib.patches as mpatches
import networkx as nx
import numpy as np

from game_core import GameGraph
from rt_solver import ValueCurve
from sim_engine import PlayRecord, MAX_SIDE
from settings import OUTPUT_DIR

logger = logging.getLogger(__name__)


def _save(fig, path: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches='tight')
    plt.close(fig)
    logger.info("Saved plot to %s", path)
    return path


def plot_value_curve(curve: ValueCurve, path: str = os.path.join(OUTPUT_DIR, 'value_curve.png'),
                     title: str = "Random-turn mean-payoff value",
                     marks: Optional[Sequence[float]] = None) -> str:
    """p -> MP(RT(G, p)) with the sample points shown"""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    dense = np.linspace(0.0, 1.0, 401)
    ax.plot(dense, curve(dense), color='tab:blue', label='interpolated')
    ax.scatter(curve.grid, curve.values, s=12, color='tab:orange', zorder=3, label='solved')
    for p in marks or ():
        ax.axvline(p, color='gray', linestyle=':', linewidth=1)
    ax.set_xlabel('bias p (probability Max moves)')
    ax.set_ylabel('mean-payoff value')
    ax.set_xlim(0.0, 1.0)
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def draw_game(game: GameGraph, path: str = os.path.join(OUTPUT_DIR, 'game.png')) -> str:
    """Game graph with weights as labels; targets highlighted"""
    graph = game.digraph
    colors = ['tab:red' if graph.nodes[v]['target'] else 'tab:blue' for v in graph.nodes]
    labels = {v: f"{v}\nw={graph.nodes[v]['weight']:g}" for v in graph.nodes}

    fig, ax = plt.subplots(figsize=(7, 5))
    pos = nx.spring_layout(graph, seed=42)
    nx.draw_networkx_nodes(graph, pos, node_color=colors, node_size=1400, ax=ax)
    nx.draw_networkx_labels(graph, pos, labels=labels, font_size=8, font_color='white', ax=ax)
    nx.draw_networkx_edges(graph, pos, arrows=True, arrowsize=15, node_size=1400,
                           connectionstyle='arc3,rad=0.1', ax=ax)
    ax.legend(handles=[mpatches.Patch(color='tab:blue', label='vertex'),
                       mpatches.Patch(color='tab:red', label='target')])
    ax.set_title(f"{game.objective} game, {game.n} vertices")
    ax.axis('off')
    return _save(fig, path)


def plot_play(record: PlayRecord, path: str = os.path.join(OUTPUT_DIR, 'play.png')) -> str:
    """Running average weight and budget ratio over a play"""
    weights = record.weights()
    rounds = np.arange(1, len(weights) + 1)
    budget_max = np.array([float(e.budget_max) for e in record.entries])
    budget_min = np.array([float(e.budget_min) for e in record.entries])
    total = budget_max + budget_min
    ratio = np.divide(budget_max, total, out=np.full_like(total, np.nan), where=total > 0)

    fig, (top, bottom) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    top.plot(rounds, np.cumsum(weights) / rounds, color='tab:green')
    top.set_ylabel('running average weight')
    top.set_title(f"{record.mech} play, {record.wins(MAX_SIDE)} of {len(weights)} bids won by Max")
    bottom.plot(rounds, ratio, color='tab:purple')
    bottom.set_ylabel('Max budget ratio')
    bottom.set_xlabel('round')
    return _save(fig, path)
