# src/game_core.py - Game graphs, mechanisms and budget distributions

import json
import logging
from enum import Enum
from fractions import Fraction
from functools import cached_property
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Any, Iterable, Iterator, Tuple, Union

import numpy as np
import networkx as nx
import jsonschema

from errors import GameValidationError
from game_validator import GameValidator

logger = logging.getLogger(__name__)

Rational = Union[Fraction, int, float, str]

RATIONAL_SCHEMA = {
    'oneOf': [
        {'type': 'number'},
        {'type': 'string', 'pattern': r'^\s*-?\d+(\.\d+)?(\s*/\s*\d+)?\s*$'}
    ]
}

GAME_SCHEMA = {
    'type': 'object',
    'required': ['objective', 'vertices', 'edges'],
    'additionalProperties': False,
    'properties': {
        'objective': {'enum': ['mean-payoff', 'reachability']},
        'vertices': {
            'type': 'array',
            'minItems': 1,
            'items': {
                'type': 'object',
                'required': ['id'],
                'additionalProperties': False,
                'properties': {
                    'id': {'type': 'string', 'minLength': 1},
                    'weight': RATIONAL_SCHEMA,
                    'target': {'type': 'boolean'}
                }
            }
        },
        'edges': {
            'type': 'array',
            'items': {
                'type': 'array',
                'minItems': 2,
                'maxItems': 2,
                'items': {'type': 'string'}
            }
        }
    }
}

DISTRIBUTION_SCHEMA = {
    'type': 'object',
    'required': ['atoms'],
    'properties': {
        'atoms': {
            'type': 'array',
            'minItems': 1,
            'items': {
                'type': 'array',
                'minItems': 2,
                'maxItems': 2,
                'items': RATIONAL_SCHEMA
            }
        }
    }
}


def to_fraction(value: Rational) -> Fraction:
    """Exact rational from an int, Fraction, decimal string, 'a/b' string or float"""
    if isinstance(value, bool):
        raise GameValidationError(f"expected a number, got {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    try:
        if isinstance(value, float):
            # shortest repr keeps 0.2 as 1/5 rather than its binary expansion
            return Fraction(repr(value))
        return Fraction(str(value).replace(' ', ''))
    except (ValueError, ZeroDivisionError) as exc:
        raise GameValidationError(f"not a rational number: {value!r}") from exc


def format_fraction(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def ratio(budget_max: Rational, budget_min: Rational) -> Fraction:
    """Max's share B/(B+C) of the total budget"""
    b, c = to_fraction(budget_max), to_fraction(budget_min)
    if b < 0 or c < 0:
        raise GameValidationError("budgets must be non-negative")
    if b + c == 0:
        raise GameValidationError("ratio undefined when both budgets are 0")
    return b / (b + c)


# ---------------------------------------------------------------- mechanisms

class PriceRule(str, Enum):
    FIRST_PRICE = 'first-price'
    ALL_PAY = 'all-pay'


class RecipientRule(str, Enum):
    RICHMAN = 'richman'
    POORMAN = 'poorman'


@dataclass(frozen=True)
class Mechanism:
    price_rule: PriceRule
    recipient_rule: RecipientRule

    @property
    def name(self) -> str:
        return f"{self.price_rule.value}-{self.recipient_rule.value}"

    @property
    def is_all_pay(self) -> bool:
        return self.price_rule is PriceRule.ALL_PAY

    @property
    def is_poorman(self) -> bool:
        return self.recipient_rule is RecipientRule.POORMAN

    @classmethod
    def parse(cls, text: str) -> 'Mechanism':
        """Accepts 'first-price-poorman', 'fp-poorman', 'all-pay-richman', 'ap-richman', ..."""
        key = text.strip().lower().replace('_', '-')
        aliases = {'fp': 'first-price', 'ap': 'all-pay', 'allpay': 'all-pay', 'firstprice': 'first-price'}
        for short, full in aliases.items():
            if key.startswith(short + '-'):
                key = full + key[len(short):]
        for price in PriceRule:
            for recipient in RecipientRule:
                if key == f"{price.value}-{recipient.value}":
                    return cls(price, recipient)
        raise GameValidationError(f"unknown mechanism {text!r}")

    def __str__(self) -> str:
        return self.name


FIRST_PRICE_POORMAN = Mechanism(PriceRule.FIRST_PRICE, RecipientRule.POORMAN)
FIRST_PRICE_RICHMAN = Mechanism(PriceRule.FIRST_PRICE, RecipientRule.RICHMAN)
ALL_PAY_POORMAN = Mechanism(PriceRule.ALL_PAY, RecipientRule.POORMAN)
ALL_PAY_RICHMAN = Mechanism(PriceRule.ALL_PAY, RecipientRule.RICHMAN)
ALL_MECHANISMS = (FIRST_PRICE_POORMAN, FIRST_PRICE_RICHMAN, ALL_PAY_POORMAN, ALL_PAY_RICHMAN)


# ---------------------------------------------------------------- game graph

@dataclass(frozen=True)
class Vertex:
    id: str
    weight: Fraction = Fraction(0)
    is_target: bool = False


@dataclass(frozen=True)
class GameGraph:
    """Directed game graph with vertex weights; validated on construction"""
    vertices: Tuple[Vertex, ...]
    edges: Tuple[Tuple[str, str], ...]
    objective: str = 'mean-payoff'

    def __post_init__(self):
        if self.objective not in ('mean-payoff', 'reachability'):
            raise GameValidationError(f"unknown objective {self.objective!r}")
        GameValidator().assert_valid(self)

    def __deepcopy__(self, memo):
        # frozen; strategy clones share the graph
        return self

    @property
    def n(self) -> int:
        return len(self.vertices)

    @cached_property
    def ids(self) -> Tuple[str, ...]:
        return tuple(vertex.id for vertex in self.vertices)

    @cached_property
    def index(self) -> Dict[str, int]:
        return {vid: i for i, vid in enumerate(self.ids)}

    @cached_property
    def successors(self) -> Tuple[Tuple[int, ...], ...]:
        """Successor indices per vertex index, in edge declaration order"""
        succ: List[List[int]] = [[] for _ in self.vertices]
        for u, v in self.edges:
            j = self.index[v]
            if j not in succ[self.index[u]]:
                succ[self.index[u]].append(j)
        return tuple(tuple(s) for s in succ)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([float(vertex.weight) for vertex in self.vertices])

    @cached_property
    def targets(self) -> frozenset:
        return frozenset(vertex.id for vertex in self.vertices if vertex.is_target)

    @cached_property
    def digraph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        for vertex in self.vertices:
            graph.add_node(vertex.id, weight=float(vertex.weight), target=vertex.is_target)
        graph.add_edges_from(self.edges)
        return graph

    @property
    def is_strongly_connected(self) -> bool:
        return nx.is_strongly_connected(self.digraph)

    def successor_ids(self, vertex_id: str) -> Tuple[str, ...]:
        return tuple(self.ids[j] for j in self.successors[self.index[vertex_id]])

    def weight_of(self, vertex_id: str) -> Fraction:
        return self.vertices[self.index[vertex_id]].weight

    def require_objective(self, objective: str) -> None:
        if self.objective != objective:
            raise GameValidationError(f"expected a {objective} game, got {self.objective}")

    def to_dict(self) -> Dict[str, Any]:
        vertices = []
        for vertex in self.vertices:
            record = {'id': vertex.id, 'weight': format_fraction(vertex.weight)}
            if vertex.is_target:
                record['target'] = True
            vertices.append(record)
        return {'objective': self.objective, 'vertices': vertices, 'edges': [list(e) for e in self.edges]}


def build_game(data: Dict[str, Any]) -> GameGraph:
    """GameGraph from an already decoded JSON document"""
    try:
        jsonschema.validate(instance=data, schema=GAME_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise GameValidationError(f"game schema violation: {exc.message}") from exc

    vertices = tuple(
        Vertex(record['id'], to_fraction(record.get('weight', 0)), bool(record.get('target', False)))
        for record in data['vertices']
    )
    edges = tuple((u, v) for u, v in data['edges'])
    return GameGraph(vertices, edges, data['objective'])


def parse_game(text: Union[bytes, str]) -> GameGraph:
    """Decode UTF-8 JSON text into a validated GameGraph"""
    if isinstance(text, bytes):
        try:
            text = text.decode('utf-8')
        except UnicodeDecodeError as exc:
            raise GameValidationError("game file is not UTF-8") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameValidationError(f"malformed game JSON: {exc}") from exc
    return build_game(data)


def serialize_game(game: GameGraph) -> str:
    return json.dumps(game.to_dict(), indent=2)


def bowtie() -> GameGraph:
    """Two vertices, weights 1 and 0, every edge present"""
    vertices = (Vertex('v1', Fraction(1)), Vertex('v0', Fraction(0)))
    edges = (('v1', 'v1'), ('v1', 'v0'), ('v0', 'v1'), ('v0', 'v0'))
    return GameGraph(vertices, edges, 'mean-payoff')


BUILTIN_GAMES = {'bowtie': bowtie}


def load_game(source: str) -> GameGraph:
    """Load a game from a JSON file path or a builtin name"""
    if source in BUILTIN_GAMES:
        return BUILTIN_GAMES[source]()
    path = Path(source)
    if not path.exists():
        raise FileNotFoundError(f"game file not found: {source}")
    logger.debug("Loading game from %s", path)
    return parse_game(path.read_bytes())


def is_two_vertex_complete(game: GameGraph) -> bool:
    """True for bowtie-shaped games: two vertices with all four edges"""
    if game.n != 2:
        return False
    return all(len(succ) == 2 for succ in game.successors)


# ---------------------------------------------------------------- distributions

@dataclass(frozen=True)
class BudgetDistribution:
    """Finite-support distribution over initial budgets, budgets strictly increasing"""
    atoms: Tuple[Tuple[Fraction, Fraction], ...]

    @property
    def budgets(self) -> Tuple[Fraction, ...]:
        return tuple(b for b, _ in self.atoms)

    @property
    def probabilities(self) -> Tuple[Fraction, ...]:
        return tuple(p for _, p in self.atoms)

    @property
    def is_point(self) -> bool:
        return len(self.atoms) == 1

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self) -> Iterator[Tuple[Fraction, Fraction]]:
        return iter(self.atoms)

    def shifted(self, amount: Fraction) -> 'BudgetDistribution':
        """Same probabilities with every budget lowered by amount (no validation of sign)"""
        return BudgetDistribution(tuple((b - amount, p) for b, p in self.atoms))

    def to_dict(self) -> Dict[str, Any]:
        return {'atoms': [[format_fraction(b), format_fraction(p)] for b, p in self.atoms]}


def make_distribution(pairs: Iterable[Tuple[Rational, Rational]]) -> BudgetDistribution:
    atoms = [(to_fraction(b), to_fraction(p)) for b, p in pairs]
    if not atoms:
        raise GameValidationError("distribution needs at least one atom")
    for budget, prob in atoms:
        if budget < 0:
            raise GameValidationError(f"negative budget {budget}")
        if prob <= 0 or prob > 1:
            raise GameValidationError(f"probability {prob} outside (0, 1]")
    budgets = [b for b, _ in atoms]
    if len(set(budgets)) != len(budgets):
        raise GameValidationError("duplicate budget in distribution")
    total = sum(p for _, p in atoms)
    if total != 1:
        raise GameValidationError(f"probabilities sum to {total}, expected 1")
    return BudgetDistribution(tuple(sorted(atoms)))


def parse_distribution(text: Union[bytes, str]) -> BudgetDistribution:
    if isinstance(text, bytes):
        text = text.decode('utf-8')
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameValidationError(f"malformed distribution JSON: {exc}") from exc
    try:
        jsonschema.validate(instance=data, schema=DISTRIBUTION_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise GameValidationError(f"distribution schema violation: {exc.message}") from exc
    return make_distribution(data['atoms'])


def load_distribution(source: str) -> BudgetDistribution:
    """'uniform:1,2', 'point:1', inline JSON or a JSON file path"""
    text = source.strip()
    if text.startswith('uniform:'):
        budgets = [item for item in text[len('uniform:'):].split(',') if item.strip()]
        if not budgets:
            raise GameValidationError("uniform distribution needs budgets")
        share = Fraction(1, len(budgets))
        return make_distribution((b.strip(), share) for b in budgets)
    if text.startswith('point:'):
        return make_distribution([(text[len('point:'):].strip(), 1)])
    if text.startswith('{'):
        return parse_distribution(text)
    path = Path(text)
    if not path.exists():
        raise FileNotFoundError(f"distribution file not found: {source}")
    return parse_distribution(path.read_bytes())
