"""Sparse graphs, degree distributions, random ensembles and neighborhood balls."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np
from scipy import stats

from tree_ising.core import GenerationError, ParameterError, rng

POISSON_TAIL = 1e-12
MAX_RESTARTS = 10_000


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph on vertices ``0..n-1``.

    Edge ``e = (i, j)`` owns directed edges ``2e`` (``i -> j``) and ``2e + 1``
    (``j -> i``). Adjacency lists are sorted by neighbor id.
    """

    n: int
    edges: np.ndarray
    multigraph: bool = False

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.n < 0:
            raise ParameterError("negative vertex count")
        if e.size and (e.min() < 0 or e.max() >= self.n):
            raise ParameterError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise ParameterError("self-loops are not allowed")
        if not self.multigraph:
            key = np.minimum(e[:, 0], e[:, 1]) * max(self.n, 1) + np.maximum(e[:, 0], e[:, 1])
            if np.unique(key).size != key.size:
                raise ParameterError("multi-edge in a simple graph (set multigraph=True)")
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], multigraph: bool = False) -> "Graph":
        return cls(n, np.array(list(edges), dtype=np.int64).reshape(-1, 2), multigraph)

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def src(self) -> np.ndarray:
        """Tail of each directed edge."""
        out = np.empty(2 * self.m, dtype=np.int64)
        out[0::2] = self.edges[:, 0]
        out[1::2] = self.edges[:, 1]
        return out

    @cached_property
    def dst(self) -> np.ndarray:
        """Head of each directed edge."""
        out = np.empty(2 * self.m, dtype=np.int64)
        out[0::2] = self.edges[:, 1]
        out[1::2] = self.edges[:, 0]
        return out

    @cached_property
    def reverse(self) -> np.ndarray:
        return np.arange(2 * self.m, dtype=np.int64) ^ 1

    @cached_property
    def _csr(self):
        # outgoing directed edges of each vertex, ordered by (neighbor, edge index)
        order = np.lexsort((np.arange(2 * self.m), self.dst, self.src))
        offsets = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.src, minlength=self.n), out=offsets[1:])
        return offsets, order

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n).astype(np.int64)

    def out_edges(self, i: int) -> np.ndarray:
        """Directed edge ids ``i -> l`` sorted by ``l``."""
        offsets, order = self._csr
        return order[offsets[i] : offsets[i + 1]]

    def neighbors(self, i: int) -> np.ndarray:
        return self.dst[self.out_edges(i)]

    def adjacency(self, i: int) -> list[tuple[int, int]]:
        """``(neighbor, edge index)`` pairs of ``i``."""
        d = self.out_edges(i)
        return list(zip(self.dst[d].tolist(), (d >> 1).tolist()))

    @cached_property
    def _directed_lookup(self) -> dict[tuple[int, int], int]:
        out: dict[tuple[int, int], int] = {}
        for d, (a, b) in enumerate(zip(self.src.tolist(), self.dst.tolist())):
            out.setdefault((a, b), d)
        return out

    def directed_edge_index(self, i: int, j: int) -> int:
        try:
            return self._directed_lookup[(int(i), int(j))]
        except KeyError:
            raise ParameterError(f"({i}, {j}) is not an edge") from None

    def diameter(self) -> int:
        """Largest finite BFS distance (0 for edgeless graphs)."""
        return max((int(bfs_distances(self, [v]).max()) for v in range(self.n)), default=0)

    def is_connected(self) -> bool:
        return self.n == 0 or bool(np.all(bfs_distances(self, [0]) >= 0))


def bfs_distances(g: Graph, sources: Iterable[int], limit: int | None = None) -> np.ndarray:
    """Distance to the nearest source, ``-1`` if unreached or beyond ``limit``."""
    dist = np.full(g.n, -1, dtype=np.int64)
    queue = deque()
    for s in sources:
        if dist[s] < 0:
            dist[s] = 0
            queue.append(s)
    while queue:
        u = queue.popleft()
        if limit is not None and dist[u] >= limit:
            continue
        for v in g.neighbors(u).tolist():
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


@dataclass(frozen=True, eq=False)
class DegreeDistribution:
    """Law ``P`` on nonnegative integers: a finite table or Poisson(mean)."""

    table: Mapping[int, float] | None = None
    poisson_mean: float | None = None

    def __post_init__(self):
        if (self.table is None) == (self.poisson_mean is None):
            raise ParameterError("give exactly one of table / poisson_mean")
        if self.table is not None:
            tab = {int(k): float(p) for k, p in self.table.items() if p != 0}
            if any(k < 0 for k in tab) or any(p < 0 for p in tab.values()):
                raise ParameterError("degrees and probabilities must be nonnegative")
            if abs(sum(tab.values()) - 1.0) > 1e-9:
                raise ParameterError(f"probabilities sum to {sum(tab.values())}, not 1")
            object.__setattr__(self, "table", dict(sorted(tab.items())))
        elif not self.poisson_mean > 0:
            raise ParameterError("Poisson mean must be positive")
        if not self.mean > 0:
            raise ParameterError("mean degree must be positive")

    @classmethod
    def regular(cls, k: int) -> "DegreeDistribution":
        return cls(table={k: 1.0})

    @classmethod
    def poisson(cls, mean: float) -> "DegreeDistribution":
        return cls(poisson_mean=mean)

    @property
    def is_poisson(self) -> bool:
        return self.poisson_mean is not None

    def pmf_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Support and masses; Poisson is cut where the upper tail drops below 1e-12."""
        if self.table is not None:
            return np.array(list(self.table), dtype=np.int64), np.array(list(self.table.values()))
        c = self.poisson_mean
        kmax = int(stats.poisson.isf(POISSON_TAIL, c)) + 1
        ks = np.arange(kmax + 1)
        return ks, stats.poisson.pmf(ks, c)

    @property
    def mean(self) -> float:
        if self.is_poisson:
            return float(self.poisson_mean)
        ks, ps = self.pmf_table()
        return float(ks @ ps)

    def size_biased(self) -> tuple[np.ndarray, np.ndarray]:
        """``rho_k = k P_k / mean`` over ``k >= 1``."""
        ks, ps = self.pmf_table()
        w = ks * ps
        keep = ks >= 1
        return ks[keep], w[keep] / w.sum()

    def offspring_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Law of ``K - 1`` for ``K ~ rho``; for Poisson(c) this is Poisson(c)."""
        ks, rho = self.size_biased()
        return ks - 1, rho

    @property
    def rho_bar(self) -> float:
        if self.is_poisson:
            return float(self.poisson_mean)
        ks, rho = self.offspring_table()
        return float(ks @ rho)

    @cached_property
    def _samplers(self):
        return _InverseCDF(*self.pmf_table()), _InverseCDF(*self.offspring_table())

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        return self._samplers[0](gen, size)

    def sample_offspring(self, gen: np.random.Generator, size: int) -> np.ndarray:
        return self._samplers[1](gen, size)

    @property
    def max_offspring(self) -> int:
        return int(self.offspring_table()[0].max())

    def __repr__(self) -> str:
        if self.is_poisson:
            return f"DegreeDistribution.poisson({self.poisson_mean})"
        return f"DegreeDistribution(table={self.table})"


class _InverseCDF:
    def __init__(self, values: np.ndarray, probs: np.ndarray):
        self.values = np.asarray(values, dtype=np.int64)
        cdf = np.cumsum(probs)
        self.cdf = cdf / cdf[-1]

    def __call__(self, gen: np.random.Generator, size: int) -> np.ndarray:
        if self.values.size == 1:
            return np.full(size, self.values[0], dtype=np.int64)
        idx = np.searchsorted(self.cdf, gen.random(size), side="right")
        return self.values[np.minimum(idx, self.values.size - 1)]


def _simple_pairing(stubs: np.ndarray, gen: np.random.Generator, n: int):
    perm = gen.permutation(stubs)
    a, b = perm[0::2], perm[1::2]
    return np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1)


def gen_random_regular(n: int, k: int, seed: int) -> Graph:
    """Uniform simple ``k``-regular graph by pairing with restart on collisions."""
    if k < 1 or n <= k:
        raise ParameterError("need k >= 1 and n > k")
    if (n * k) % 2:
        raise ParameterError("n * k must be even")
    gen = rng(seed, "gen_random_regular")
    stubs = np.repeat(np.arange(n, dtype=np.int64), k)
    for _ in range(MAX_RESTARTS):
        pairs = _simple_pairing(stubs, gen, n)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        if np.unique(pairs[:, 0] * n + pairs[:, 1]).size != pairs.shape[0]:
            continue
        return Graph(n, pairs)
    raise GenerationError(f"no simple pairing after {MAX_RESTARTS} restarts")


def gen_erdos_renyi(n: int, gamma: float, seed: int) -> Graph:
    """Uniform simple graph with exactly ``floor(n * gamma)`` edges."""
    if not gamma > 0:
        raise ParameterError("gamma must be positive")
    m = int(math.floor(n * gamma))
    if m > n * (n - 1) // 2:
        raise ParameterError("too many edges for a simple graph")
    gen = rng(seed, "gen_erdos_renyi")
    keys = np.empty(0, dtype=np.int64)
    while keys.size < m:
        batch = max(2 * (m - keys.size), 64)
        i = gen.integers(0, n, size=batch)
        j = gen.integers(0, n, size=batch)
        ok = i != j
        new = np.minimum(i, j)[ok] * n + np.maximum(i, j)[ok]
        allk = np.concatenate([keys, new])
        _, first = np.unique(allk, return_index=True)
        keys = allk[np.sort(first)]
    keys = keys[:m]
    return Graph(n, np.stack([keys // n, keys % n], axis=1))


def degree_sequence(n: int, P: DegreeDistribution) -> np.ndarray:
    """``floor(n P_k)`` vertices of degree ``k``; the rounding residue goes to the
    most probable degree, and one degree-1 vertex is appended if the degree sum is odd."""
    ks, ps = P.pmf_table()
    counts = np.floor(n * ps).astype(np.int64)
    counts[int(np.argmax(ps))] += n - counts.sum()
    degs = np.repeat(ks, counts)
    if degs.sum() % 2:
        degs = np.append(degs, 1)
    return degs


def gen_configuration(n: int, P: DegreeDistribution, seed: int, simplify: bool = True) -> Graph:
    """Configuration model with uniform stub matching.

    Self-loops are always dropped; multi-edges are collapsed unless
    ``simplify=False``, which returns a multigraph.
    """
    if P.is_poisson:
        raise ParameterError("configuration model needs a finite degree table")
    degs = degree_sequence(n, P)
    if degs.size == 0 or degs.sum() == 0:
        raise ParameterError("empty degree sequence")
    nv = degs.size
    gen = rng(seed, "gen_configuration")
    stubs = np.repeat(np.arange(nv, dtype=np.int64), degs)
    pairs = _simple_pairing(stubs, gen, nv)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if simplify:
        _, first = np.unique(pairs[:, 0] * nv + pairs[:, 1], return_index=True)
        pairs = pairs[np.sort(first)]
        return Graph(nv, pairs)
    return Graph(nv, pairs, multigraph=True)


@dataclass(frozen=True, eq=False)
class Ball:
    """Induced subgraph of the vertices within distance ``radius`` of a center.

    ``vertices`` lists original labels in BFS order; vertex ``a`` of ``subgraph``
    is ``vertices[a]``. ``boundary`` holds original labels at distance exactly
    ``radius``.
    """

    center: tuple[int, ...]
    radius: int
    vertices: tuple[int, ...]
    subgraph: Graph
    boundary: tuple[int, ...]
    distance: tuple[int, ...] = field(repr=False)

    @property
    def vertex_map(self) -> dict[int, int]:
        return {v: a for a, v in enumerate(self.vertices)}


def _ball(g: Graph, sources: list[int], t: int) -> tuple[tuple[int, ...], Graph, tuple[int, ...], tuple[int, ...]]:
    if t < 0:
        raise ParameterError("radius must be >= 0")
    dist = np.full(g.n, -1, dtype=np.int64)
    order: list[int] = []
    queue = deque()
    for s in sources:
        if dist[s] < 0:
            dist[s] = 0
            order.append(s)
            queue.append(s)
    while queue:
        u = queue.popleft()
        if dist[u] >= t:
            continue
        for v in g.neighbors(u).tolist():
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                order.append(v)
                queue.append(v)
    index = {v: a for a, v in enumerate(order)}
    eids = sorted({
        int(d) >> 1
        for u in order
        for d in g.out_edges(u).tolist()
        if int(g.dst[d]) in index
    })
    sub = [(index[int(g.edges[e, 0])], index[int(g.edges[e, 1])]) for e in eids]
    sg = Graph.from_edges(len(order), sub, multigraph=g.multigraph)
    boundary = tuple(v for v in order if dist[v] == t)
    return tuple(order), sg, boundary, tuple(int(dist[v]) for v in order)


def ball(g: Graph, i: int, t: int) -> Ball:
    if not 0 <= i < g.n:
        raise ParameterError("vertex out of range")
    verts, sg, bnd, dist = _ball(g, [i], t)
    return Ball((i,), t, verts, sg, bnd, dist)


def edge_ball(g: Graph, e: int | tuple[int, int], t: int) -> Ball:
    """Ball around an edge, given by index or endpoint pair."""
    if isinstance(e, tuple):
        e = g.directed_edge_index(*e) >> 1
    i, j = (int(x) for x in g.edges[e])
    verts, sg, bnd, dist = _ball(g, [i, j], t)
    return Ball((i, j), t, verts, sg, bnd, dist)


def is_tree(b: Ball | Graph) -> bool:
    sg = b.subgraph if isinstance(b, Ball) else b
    return sg.n > 0 and sg.m == sg.n - 1 and sg.is_connected()


def sparsity_stat(g: Graph, l: int) -> float:
    """``(1/n) sum_i deg(i) 1[deg(i) >= l]``."""
    if l < 0:
        raise ParameterError("l must be >= 0")
    d = g.degrees
    return float(d[d >= l].sum() / g.n)


def local_tree_fraction(g: Graph, t: int, samples: int, seed: int) -> float:
    """Fraction of uniformly sampled vertices whose radius-``t`` ball is a tree."""
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    gen = rng(seed, "local_tree_fraction")
    picks = gen.integers(0, g.n, size=samples)
    return float(np.mean([is_tree(ball(g, int(v), t)) for v in picks]))


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def random_labeled_tree(n: int, gen: np.random.Generator) -> Graph:
    """Uniform labeled tree on ``n`` vertices via a random Pruefer sequence."""
    if n <= 1:
        return Graph(n, np.zeros((0, 2), dtype=np.int64))
    if n == 2:
        return Graph.from_edges(2, [(0, 1)])
    seq = gen.integers(0, n, size=n - 2).tolist()
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    edges = []
    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    edges.append((heapq.heappop(leaves), heapq.heappop(leaves)))
    return Graph.from_edges(n, edges)
