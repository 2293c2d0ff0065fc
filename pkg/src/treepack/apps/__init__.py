"""Application adapters: concrete problems reduced to the additive DP."""

from .covering import colorful_orienteering, steiner_cover
from .flows import generalized_flow
from .graphs import (BipartiteGraph, DirectedGraph, Edge, graph_dumps,
                     graph_from_json, graph_loads, graph_to_json, max_flow)
from .matching import (check_naive_lp, gap_instance, perfect_matchings,
                       robust_perfect_matching)
from .paths import robust_shortest_path
from .sequences import bounded_rep_lcs

__all__ = [
    "BipartiteGraph", "DirectedGraph", "Edge",
    "bounded_rep_lcs", "check_naive_lp", "colorful_orienteering",
    "gap_instance", "generalized_flow", "graph_dumps", "graph_from_json",
    "graph_loads", "graph_to_json", "max_flow", "perfect_matchings",
    "robust_perfect_matching", "robust_shortest_path", "steiner_cover",
]
