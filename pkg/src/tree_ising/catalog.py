"""Catalog of all connected graphs on up to 8 vertices, one per isomorphism class.

Graphs with at most 7 vertices come from the networkx graph atlas. The 11117
connected graphs on 8 vertices are read from a packaged graph6 file produced by
``scripts/build_graph_catalog.py`` (generation takes about a minute).
"""

from __future__ import annotations

from collections import defaultdict
from functools import lru_cache
from importlib import resources

import networkx as nx

from tree_ising.core import ParameterError
from tree_ising.graphs import Graph

DATA_FILE = "connected_graphs_8.g6"
COUNTS = {1: 1, 2: 1, 3: 2, 4: 6, 5: 21, 6: 112, 7: 853, 8: 11117}


def _to_graph(h: nx.Graph) -> Graph:
    h = nx.convert_node_labels_to_integers(h, ordering="sorted")
    return Graph.from_edges(h.number_of_nodes(), sorted(tuple(sorted(e)) for e in h.edges()))


def _atlas(n: int) -> list[nx.Graph]:
    return [h for h in nx.graph_atlas_g() if h.number_of_nodes() == n and nx.is_connected(h)]


def generate_connected_8() -> list[nx.Graph]:
    """Extend each 7-vertex graph by a vertex joined to every nonempty neighbor set.

    Every connected 8-vertex graph arises this way (delete any vertex whose
    removal keeps the rest connected). Duplicates are removed by a
    Weisfeiler-Lehman hash followed by exact isomorphism tests within a bucket.
    """
    buckets: dict[str, list[nx.Graph]] = defaultdict(list)
    out = []
    for g in (h for h in nx.graph_atlas_g() if h.number_of_nodes() == 7):
        for mask in range(1, 1 << 7):
            h = g.copy()
            h.add_node(7)
            h.add_edges_from((7, v) for v in range(7) if mask >> v & 1)
            if not nx.is_connected(h):
                continue
            bucket = buckets[nx.weisfeiler_lehman_graph_hash(h, iterations=3)]
            if any(nx.is_isomorphic(h, o) for o in bucket):
                continue
            bucket.append(h)
            out.append(h)
    return out


@lru_cache(maxsize=None)
def connected_graphs(n: int) -> tuple[Graph, ...]:
    if n not in COUNTS:
        raise ParameterError("catalog covers 1 <= n <= 8")
    if n <= 7:
        graphs = _atlas(n)
    else:
        with resources.files("tree_ising").joinpath("data", DATA_FILE).open("rb") as fh:
            graphs = list(nx.read_graph6(fh))
    return tuple(_to_graph(h) for h in graphs)
