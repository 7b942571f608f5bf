# src/game_validator.py
import logging
import networkx as nx
from typing import Dict, List, Any
from collections import Counter

from errors import GameValidationError

logger = logging.getLogger(__name__)


class GameValidator:
    def __init__(self):
        self.validation_rules = {
            'duplicate_vertices': self.check_duplicate_vertices,
            'dangling_edges': self.check_dangling_edges,
            'out_degree': self.check_out_degree,
            'strong_connectivity': self.check_strong_connectivity,
            'targets': self.check_targets,
            'target_reachability': self.check_target_reachability,
        }

    def validate_game(self, game) -> Dict[str, Any]:
        """Run every structural rule against a game graph"""
        validation_results = {
            'total_checks': len(self.validation_rules),
            'passed_checks': 0,
            'failed_checks': 0,
            'warnings': 0,
            'critical_issues': [],
            'warnings_list': [],
            'suggestions': [],
            'detailed_results': {}
        }

        for rule_name, rule_function in self.validation_rules.items():
            result = rule_function(game)
            validation_results['detailed_results'][rule_name] = result

            if result['status'] == 'pass':
                validation_results['passed_checks'] += 1
            elif result['status'] == 'fail':
                validation_results['failed_checks'] += 1
                validation_results['critical_issues'].extend(result['issues'])
            elif result['status'] == 'warning':
                validation_results['warnings'] += 1
                validation_results['warnings_list'].extend(result['issues'])

            validation_results['suggestions'].extend(result.get('suggestions', []))

        return validation_results

    def assert_valid(self, game) -> Dict[str, Any]:
        """Validate and raise GameValidationError listing every failed rule"""
        results = self.validate_game(game)
        for warning in results['warnings_list']:
            logger.warning("Game check: %s", warning)
        if results['failed_checks']:
            raise GameValidationError("invalid game: " + "; ".join(results['critical_issues']))
        return results

    def _vertex_ids(self, game) -> List[str]:
        return [vertex.id for vertex in game.vertices]

    def _graph(self, game) -> nx.DiGraph:
        """Directed graph restricted to declared vertices"""
        graph = nx.DiGraph()
        ids = set(self._vertex_ids(game))
        graph.add_nodes_from(ids)
        graph.add_edges_from((u, v) for u, v in game.edges if u in ids and v in ids)
        return graph

    def check_duplicate_vertices(self, game) -> Dict[str, Any]:
        counts = Counter(self._vertex_ids(game))
        duplicates = sorted(vid for vid, count in counts.items() if count > 1)
        return {
            'status': 'fail' if duplicates else 'pass',
            'issues': [f"vertex {vid!r} declared more than once" for vid in duplicates],
            'suggestions': [f"Rename one of the {vid!r} vertices" for vid in duplicates]
        }

    def check_dangling_edges(self, game) -> Dict[str, Any]:
        """Edge endpoints must reference declared vertices"""
        ids = set(self._vertex_ids(game))
        dangling = [(u, v) for u, v in game.edges if u not in ids or v not in ids]
        return {
            'status': 'fail' if dangling else 'pass',
            'issues': [f"edge {u!r}->{v!r} references an unknown vertex" for u, v in dangling],
            'suggestions': ["Declare every edge endpoint in 'vertices'"] if dangling else []
        }

    def check_out_degree(self, game) -> Dict[str, Any]:
        graph = self._graph(game)
        sinks = sorted(vid for vid in graph.nodes if graph.out_degree(vid) == 0)
        return {
            'status': 'fail' if sinks else 'pass',
            'issues': [f"vertex {vid!r} has no successor" for vid in sinks],
            'suggestions': [f"Add a self-loop on {vid!r} to make it absorbing" for vid in sinks]
        }

    def check_strong_connectivity(self, game) -> Dict[str, Any]:
        """Mean-payoff games need a single strongly connected component"""
        if game.objective != 'mean-payoff':
            return {'status': 'pass', 'issues': [], 'suggestions': []}

        graph = self._graph(game)
        if graph.number_of_nodes() == 0 or nx.is_strongly_connected(graph):
            return {'status': 'pass', 'issues': [], 'suggestions': []}

        components = [sorted(c) for c in nx.strongly_connected_components(graph)]
        return {
            'status': 'fail',
            'issues': [f"mean-payoff graph is not strongly connected ({len(components)} components)"],
            'suggestions': [f"Connect components {components}"]
        }

    def check_targets(self, game) -> Dict[str, Any]:
        if game.objective != 'reachability':
            return {'status': 'pass', 'issues': [], 'suggestions': []}

        has_target = any(vertex.is_target for vertex in game.vertices)
        return {
            'status': 'pass' if has_target else 'fail',
            'issues': [] if has_target else ["reachability game without a target vertex"],
            'suggestions': [] if has_target else ["Mark at least one vertex with \"target\": true"]
        }

    def check_target_reachability(self, game) -> Dict[str, Any]:
        """Vertices that cannot reach any target have threshold 1"""
        if game.objective != 'reachability':
            return {'status': 'pass', 'issues': [], 'suggestions': []}

        graph = self._graph(game)
        reaching = set()
        for vertex in game.vertices:
            if vertex.is_target and vertex.id in graph:
                reaching |= nx.ancestors(graph, vertex.id) | {vertex.id}
        stranded = sorted(set(graph.nodes) - reaching)
        return {
            'status': 'warning' if stranded else 'pass',
            'issues': [f"vertex {vid!r} cannot reach a target" for vid in stranded],
            'suggestions': []
        }
