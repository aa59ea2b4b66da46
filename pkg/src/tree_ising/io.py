"""Text formats: graphs, degree distributions, trees, populations and CSV tables.

* graph: header ``n m`` then ``m`` lines ``i j`` (0-based); ``#`` lines ignored.
* degree distribution: lines ``k p_k``, or the single line ``poisson <mean>``.
* tree: one node per line ``idx parent depth field`` (parent ``-1`` at the root).
* CSV: first line ``# {json metadata}``, then a header row and data rows.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from tree_ising.core import ParameterError
from tree_ising.graphs import DegreeDistribution, Graph
from tree_ising.trees import RootedTree


def _content_lines(text: str) -> list[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def parse_graph(text: str) -> Graph:
    lines = _content_lines(text)
    if not lines:
        raise ParameterError("empty graph file")
    try:
        n, m = (int(x) for x in lines[0].split())
        edges = [tuple(int(x) for x in ln.split()) for ln in lines[1:]]
    except ValueError as err:
        raise ParameterError(f"malformed graph file: {err}") from None
    if len(edges) != m or any(len(e) != 2 for e in edges):
        raise ParameterError(f"header promises {m} edges, found {len(edges)}")
    return Graph.from_edges(n, edges, multigraph=len(set(tuple(sorted(e)) for e in edges)) < m)


def format_graph(g: Graph) -> str:
    rows = [f"{g.n} {g.m}"] + [f"{i} {j}" for i, j in g.edges.tolist()]
    return "\n".join(rows) + "\n"


def read_graph(path) -> Graph:
    return parse_graph(Path(path).read_text())


def write_graph(g: Graph, path):
    Path(path).write_text(format_graph(g))


def parse_degree_spec(spec: str) -> DegreeDistribution:
    """Inline specs ``poisson:3``, ``regular:3`` or ``1:0.5,3:0.5``."""
    spec = spec.strip()
    kind, _, rest = spec.partition(":")
    try:
        if kind == "poisson":
            return DegreeDistribution.poisson(float(rest))
        if kind == "regular":
            return DegreeDistribution.regular(int(rest))
        table = {}
        for item in spec.split(","):
            k, p = item.split(":")
            table[int(k)] = float(p)
        return DegreeDistribution(table=table)
    except ValueError as err:
        raise ParameterError(f"bad degree spec {spec!r}: {err}") from None


def parse_degree_file(text: str) -> DegreeDistribution:
    lines = _content_lines(text)
    if len(lines) == 1 and lines[0].split()[0] == "poisson":
        return DegreeDistribution.poisson(float(lines[0].split()[1]))
    try:
        table = {int(a): float(b) for a, b in (ln.split() for ln in lines)}
    except ValueError as err:
        raise ParameterError(f"malformed degree file: {err}") from None
    return DegreeDistribution(table=table)


def load_degree(spec: str) -> DegreeDistribution:
    """A degree spec string, or the path of a degree file."""
    p = Path(spec)
    if p.is_file():
        return parse_degree_file(p.read_text())
    return parse_degree_spec(spec)


def format_tree(tree: RootedTree, fields: Sequence[float] | None = None) -> str:
    f = np.zeros(tree.n) if fields is None and tree.field is None else np.asarray(tree.field if fields is None else fields, dtype=float)
    return "".join(
        f"{v} {int(tree.parent[v])} {int(tree.depth[v])} {_fmt_field(f[v])}\n" for v in range(tree.n)
    )


def _fmt_field(x: float) -> str:
    return "inf" if math.isinf(x) else repr(float(x))


def parse_tree(text: str) -> RootedTree:
    rows = [ln.split() for ln in _content_lines(text)]
    if any(len(r) != 4 for r in rows):
        raise ParameterError("tree lines need 'idx parent depth field'")
    rows.sort(key=lambda r: int(r[0]))
    if [int(r[0]) for r in rows] != list(range(len(rows))):
        raise ParameterError("tree indices must be 0..n-1")
    parent = np.array([int(r[1]) for r in rows], dtype=np.int64)
    field = np.array([float(r[3]) for r in rows])
    tree = RootedTree.from_parent_list(parent, field=field)
    if not np.array_equal(tree.depth, [int(r[2]) for r in rows]):
        raise ParameterError("depth column disagrees with parent pointers")
    return tree


def write_population(samples: Iterable[float], path):
    np.savetxt(path, np.asarray(samples, dtype=float), fmt="%.17g")


def read_population(path) -> np.ndarray:
    return np.loadtxt(path, dtype=float, ndmin=1)


def format_csv(rows: Sequence[Mapping], columns: Sequence[str], meta: Mapping | None = None) -> str:
    buf = io.StringIO()
    if meta is not None:
        buf.write("# " + json.dumps(meta, sort_keys=True, default=_json_default) + "\n")
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: _csv_value(r.get(k)) for k in columns})
    return buf.getvalue()


def _csv_value(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    return str(o)


def read_csv(text: str) -> tuple[dict | None, list[dict]]:
    lines = text.splitlines()
    meta = None
    if lines and lines[0].startswith("#"):
        meta = json.loads(lines[0][1:])
        lines = lines[1:]
    return meta, list(csv.DictReader(lines))
