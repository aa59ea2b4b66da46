"""Rooted trees: Galton-Watson sampling, exact Ising recursions, computation trees.

Trees are stored as parent arrays in breadth-first order, so every generation is
a contiguous index range and the children of a node are contiguous as well.
All exact computations run generation by generation over numpy arrays.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from tree_ising.core import IsingParams, ParameterError, log_2cosh, rng, xi
from tree_ising.graphs import DegreeDistribution, Graph

MAX_TREE_NODES = 10_000_000


class BoundaryCondition(enum.Enum):
    FREE = "free"
    PLUS = "plus"

    @classmethod
    def parse(cls, bc: "BoundaryCondition | str") -> "BoundaryCondition":
        return bc if isinstance(bc, cls) else cls(str(bc).lower())


FREE = BoundaryCondition.FREE
PLUS = BoundaryCondition.PLUS


@dataclass(frozen=True, eq=False)
class RootedTree:
    """Finite rooted tree in BFS order (node 0 is the root).

    ``height`` is the nominal number of generations; the plus boundary acts on
    nodes whose ``level`` equals it. ``level`` defaults to the depth; edge-rooted
    trees measure it from the nearer endpoint of the root edge. ``field`` (if set)
    is a per-node field used when the model parameters carry no per-vertex
    fields. ``label`` maps nodes back to graph vertices for computation trees.
    """

    parent: np.ndarray
    height: int
    field: np.ndarray | None = None
    label: np.ndarray | None = None
    level: np.ndarray | None = None
    truncated: bool = False

    def __post_init__(self):
        p = np.asarray(self.parent, dtype=np.int64)
        if p.size == 0 or p[0] != -1:
            raise ParameterError("node 0 must be the root (parent -1)")
        rest = p[1:]
        if np.any(rest < 0) or np.any(rest >= np.arange(1, p.size)):
            raise ParameterError("parents must precede children")
        if np.any(np.diff(rest) < 0):
            raise ParameterError("nodes must be in breadth-first order")
        object.__setattr__(self, "parent", p)
        if self.level is None:
            object.__setattr__(self, "level", self.depth)
        for name in ("field", "label", "level"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != p.size:
                raise ParameterError(f"{name} has wrong length")

    @classmethod
    def from_parent_list(cls, parents, height: int | None = None, field=None) -> "RootedTree":
        """Build from an arbitrary parent list (root has parent -1), relabeling to BFS order."""
        parents = list(parents)
        n = len(parents)
        roots = [v for v in range(n) if parents[v] < 0]
        if len(roots) != 1:
            raise ParameterError("need exactly one root")
        kids: list[list[int]] = [[] for _ in range(n)]
        for v, p in enumerate(parents):
            if p >= 0:
                kids[p].append(v)
        order = [roots[0]]
        for v in order:
            order.extend(kids[v])
        if len(order) != n:
            raise ParameterError("parent list is not a tree")
        new = {v: a for a, v in enumerate(order)}
        par = np.array([-1] + [new[parents[v]] for v in order[1:]], dtype=np.int64)
        f = None if field is None else np.asarray(field, dtype=float)[order]
        tree = cls(par, 0, field=f, label=np.array(order, dtype=np.int64))
        h = int(tree.depth.max()) if height is None else height
        return cls(par, h, field=f, label=tree.label)

    @classmethod
    def from_graph(cls, g: Graph, root: int = 0, field=None) -> "RootedTree":
        parents = [-2] * g.n
        parents[root] = -1
        stack = [root]
        while stack:
            u = stack.pop()
            for v in g.neighbors(u).tolist():
                if parents[v] == -2:
                    parents[v] = u
                    stack.append(v)
        if -2 in parents or g.m != g.n - 1:
            raise ParameterError("graph is not a tree")
        return cls.from_parent_list(parents, field=field)

    @property
    def n(self) -> int:
        return int(self.parent.size)

    @cached_property
    def level_bounds(self) -> np.ndarray:
        """``level_bounds[d]:level_bounds[d+1]`` indexes the nodes at depth ``d``."""
        # breadth-first order: depth d+1 is every node whose parent has depth <= d
        bounds = [0, 1]
        rest = self.parent[1:]
        while bounds[-1] < self.n:
            bounds.append(1 + int(np.searchsorted(rest, bounds[-1], side="left")))
        return np.array(bounds, dtype=np.int64)

    @cached_property
    def depth(self) -> np.ndarray:
        b = self.level_bounds
        return np.repeat(np.arange(b.size - 1, dtype=np.int64), np.diff(b))

    @cached_property
    def n_children(self) -> np.ndarray:
        return np.bincount(self.parent[1:], minlength=self.n)

    def children(self, v: int) -> np.ndarray:
        lo = 1 + np.searchsorted(self.parent[1:], v, side="left")
        hi = 1 + np.searchsorted(self.parent[1:], v, side="right")
        return np.arange(lo, hi)

    def path_to_root(self, v: int) -> list[int]:
        path = [int(v)]
        while self.parent[path[-1]] >= 0:
            path.append(int(self.parent[path[-1]]))
        return path

    def truncate(self, ell: int) -> "RootedTree":
        """First ``ell`` generations; node indices are preserved (BFS prefix)."""
        if ell < 0:
            raise ParameterError("depth must be >= 0")
        k = int(np.searchsorted(self.depth, ell, side="right"))
        sl = slice(0, k)
        return RootedTree(
            self.parent[sl],
            ell,
            field=None if self.field is None else self.field[sl],
            label=None if self.label is None else self.label[sl],
            level=self.level[sl],
            truncated=self.truncated,
        )

    def subtree(self, v: int) -> tuple["RootedTree", np.ndarray]:
        """Subtree of ``v`` and its descendants, plus the original index of each node."""
        members = [int(v)]
        for u in members:
            members.extend(self.children(u).tolist())
        members_arr = np.array(members, dtype=np.int64)
        pos = {u: a for a, u in enumerate(members)}
        par = np.array([-1] + [pos[int(self.parent[u])] for u in members[1:]], dtype=np.int64)
        d0 = int(self.depth[v])
        sub = RootedTree(
            par,
            max(self.height - d0, 0),
            field=None if self.field is None else self.field[members_arr],
            label=None if self.label is None else self.label[members_arr],
        )
        return sub, members_arr

    def to_graph(self) -> Graph:
        return Graph(self.n, np.stack([self.parent[1:], np.arange(1, self.n)], axis=1))


def _node_fields(tree: RootedTree, params: IsingParams, bc) -> np.ndarray:
    if params.per_vertex_fields is not None:
        f = params.fields(tree.n).copy()
    elif tree.field is not None:
        f = np.asarray(tree.field, dtype=float).copy()
    else:
        f = np.full(tree.n, float(params.field))
    if BoundaryCondition.parse(bc) is PLUS:
        f[tree.level == tree.height] = math.inf
    return f


def _upward(tree: RootedTree, beta: float, f: np.ndarray):
    """Subtree cavity fields ``h`` and children sums ``s`` (so ``h = f + s``)."""
    s = np.zeros(tree.n)
    h = f.copy()
    bounds = tree.level_bounds
    for d in range(len(bounds) - 2, 0, -1):
        lo, hi = bounds[d], bounds[d + 1]
        plo = bounds[d - 1]
        contrib = np.bincount(tree.parent[lo:hi] - plo, weights=xi(beta, h[lo:hi]), minlength=bounds[d] - plo)
        s[plo:lo] += contrib
        h[plo:lo] = f[plo:lo] + s[plo:lo]
    return h, s


def _downward(tree: RootedTree, beta: float, h: np.ndarray, root_field: float) -> np.ndarray:
    """Full effective field of every node given the root's total field."""
    x = xi(beta, h)
    H = np.empty(tree.n)
    H[0] = root_field
    bounds = tree.level_bounds
    for d in range(1, len(bounds) - 1):
        lo, hi = bounds[d], bounds[d + 1]
        par = tree.parent[lo:hi]
        with np.errstate(invalid="ignore"):
            cavity = H[par] - x[lo:hi]
            H[lo:hi] = h[lo:hi] + xi(beta, cavity)
    return H


def root_cavity_field(tree: RootedTree, params: IsingParams, bc="free") -> float:
    """Root field ``h_o`` from ``h_v = B_v + sum_c xi(beta, h_c)``; magnetization is ``tanh``."""
    h, _ = _upward(tree, params.beta, _node_fields(tree, params, bc))
    return float(h[0])


def root_magnetization(tree: RootedTree, params: IsingParams, bc="free") -> float:
    return math.tanh(root_cavity_field(tree, params, bc))


def node_magnetizations(tree: RootedTree, params: IsingParams, bc="free") -> np.ndarray:
    h, _ = _upward(tree, params.beta, _node_fields(tree, params, bc))
    return np.tanh(_downward(tree, params.beta, h, h[0]))


def tree_log_partition(tree: RootedTree, params: IsingParams, bc="free") -> float:
    """Exact ``log Z`` by leaf-to-root elimination.

    A node with field ``+inf`` is pinned to ``+1`` and contributes no field factor;
    under the plus boundary this is the constrained partition function.
    """
    beta = params.beta
    f = _node_fields(tree, params, bc)
    h, s = _upward(tree, beta, f)
    pinned = np.isposinf(h)
    with np.errstate(invalid="ignore"):
        log_c = np.where(pinned, 0.0, 0.5 * (log_2cosh(h + beta) + log_2cosh(h - beta)))
    # log of the unnormalized subtree weight carried by each node's own factor
    own = np.where(pinned, s, log_c)
    log_a = np.zeros(tree.n)
    bounds = tree.level_bounds
    for d in range(len(bounds) - 2, 0, -1):
        lo, hi = bounds[d], bounds[d + 1]
        plo = bounds[d - 1]
        log_a[plo:lo] += np.bincount(
            tree.parent[lo:hi] - plo, weights=log_a[lo:hi] + own[lo:hi], minlength=lo - plo
        )
    if pinned[0]:
        return float(log_a[0] + s[0])
    return float(log_a[0] + log_2cosh(h[0]))


def root_correlations(tree: RootedTree, params: IsingParams, bc="free") -> np.ndarray:
    """``<x_o; x_v>`` for every node ``v``.

    Conditions the root on each sign (root field ``±inf``) and uses
    ``<x_o; x_v> = (1 - <x_o>^2)/2 * (E[x_v | x_o=+1] - E[x_v | x_o=-1])``.
    """
    beta = params.beta
    f = _node_fields(tree, params, bc)
    if not math.isfinite(f[0]):
        return np.zeros(tree.n)
    h, s = _upward(tree, beta, f)
    m_plus = np.tanh(_downward(tree, beta, h, math.inf))
    m_minus = np.tanh(_downward(tree, beta, h, -math.inf))
    var = 1.0 / math.cosh(h[0]) ** 2 if abs(h[0]) < 700 else 0.0
    return 0.5 * var * (m_plus - m_minus)


def root_pair_correlation(tree: RootedTree, params: IsingParams, bc, v: int) -> float:
    if not 0 <= v < tree.n:
        raise ParameterError("node out of range")
    return float(root_correlations(tree, params, bc)[v])


def _grow(first: np.ndarray, dist: DegreeDistribution, t: int, gen, max_nodes: int):
    """Generation sizes after the root, given the root's offspring count."""
    parents = [np.array([-1], dtype=np.int64)]
    counts = first
    start = 0
    total = 1
    truncated = False
    for d in range(1, t + 1):
        width = parents[-1].size
        kids = np.repeat(np.arange(start, start + width, dtype=np.int64), counts)
        if total + kids.size > max_nodes:
            truncated = True
            warnings.warn(f"tree truncated at depth {d - 1}: node cap {max_nodes} reached")
            break
        parents.append(kids)
        start += width
        total += kids.size
        if kids.size == 0:
            break
        counts = dist.sample_offspring(gen, kids.size)
    return np.concatenate(parents), truncated


def sample_tree(P: DegreeDistribution, t: int, seed: int, substream: int = 0, max_nodes: int = MAX_TREE_NODES) -> RootedTree:
    """``T(P, rho, t)``: root offspring ~ P, later offspring ``K - 1`` with ``K ~ rho``."""
    if t < 0:
        raise ParameterError("t must be >= 0")
    gen = rng(seed, "sample_tree", substream)
    parent, trunc = _grow(P.sample(gen, 1), P, t, gen, max_nodes)
    return RootedTree(parent, t, truncated=trunc)


def sample_tree_rho(P: DegreeDistribution, t: int, seed: int, substream: int = 0, max_nodes: int = MAX_TREE_NODES) -> RootedTree:
    """``T(rho, t)``: every node, root included, has ``K - 1`` offspring, ``K ~ rho``."""
    if t < 0:
        raise ParameterError("t must be >= 0")
    gen = rng(seed, "sample_tree_rho", substream)
    parent, trunc = _grow(P.sample_offspring(gen, 1), P, t, gen, max_nodes)
    return RootedTree(parent, t, truncated=trunc)


def sample_edge_tree(P: DegreeDistribution, t: int, seed: int) -> RootedTree:
    """Two independent ``T(rho, t)`` glued by a root edge.

    The halves are ``sample_tree_rho(P, t, seed, substream=1)`` (rooted at node 0)
    and ``substream=2`` (rooted at node 1, the first child of node 0).
    """
    a = sample_tree_rho(P, t, seed, substream=1)
    b = sample_tree_rho(P, t, seed, substream=2)
    # combined generation d holds b's generation d-1, then a's generation d
    parts_par, parts_lvl, offset_a, offset_b = [], [], {}, {}
    new_index = 0
    da, db = a.level_bounds, b.level_bounds
    n_levels = max(len(da) - 1, len(db))
    for d in range(n_levels):
        blocks = []
        if d >= 1 and d - 1 < len(db) - 1:
            blocks.append(("b", db[d - 1], db[d]))
        if d < len(da) - 1:
            blocks.append(("a", da[d], da[d + 1]))
        for side, lo, hi in blocks:
            src = a if side == "a" else b
            table = offset_a if side == "a" else offset_b
            for u in range(lo, hi):
                table[u] = new_index
                new_index += 1
            if side == "a":
                par = [-1] if d == 0 else [offset_a[int(p)] for p in src.parent[lo:hi]]
            else:
                par = [0] if d == 1 else [offset_b[int(p)] for p in src.parent[lo:hi]]
            parts_par.extend(par)
            parts_lvl.extend(src.depth[lo:hi].tolist())
    return RootedTree(
        np.array(parts_par, dtype=np.int64),
        t,
        level=np.array(parts_lvl, dtype=np.int64),
        truncated=a.truncated or b.truncated,
    )


def computation_tree(g: Graph, e, t: int, max_nodes: int = MAX_TREE_NODES) -> RootedTree:
    """Unrolled tree of the directed edge ``e = i -> j`` to depth ``t``.

    The root is ``i``; a node reached through edge ``u -> v`` has as children all
    edges ``v -> w`` other than the reverse of the edge it came through.
    ``label`` gives the graph vertex of each node.
    """
    if t < 0:
        raise ParameterError("t must be >= 0")
    d0 = g.directed_edge_index(*e) if isinstance(e, tuple) else int(e)
    labels = [int(g.src[d0])]
    parents = [-1]
    # for the root, the excluded undirected edge is (i, j) itself
    frontier = [(0, int(g.src[d0]), d0 >> 1)]
    for _ in range(t):
        nxt = []
        for idx, u, excl in frontier:
            for d in g.out_edges(u).tolist():
                if d >> 1 == excl:
                    continue
                parents.append(idx)
                labels.append(int(g.dst[d]))
                nxt.append((len(labels) - 1, int(g.dst[d]), d >> 1))
        if len(labels) > max_nodes:
            raise ParameterError("computation tree exceeds node cap")
        frontier = nxt
    return RootedTree(np.array(parents, dtype=np.int64), t, label=np.array(labels, dtype=np.int64))


def boundary_gaps(tree: RootedTree, params: IsingParams, depths) -> np.ndarray:
    """``m^{l,+} - m^{l,0}`` at the root for each ``l`` in ``depths``."""
    out = []
    for ell in depths:
        sub = tree.truncate(ell)
        out.append(root_magnetization(sub, params, PLUS) - root_magnetization(sub, params, FREE))
    return np.array(out)


def generation_correlation_sums(tree: RootedTree, params: IsingParams, radii) -> np.ndarray:
    """``sum_{i at depth r} <x_o; x_i>`` under the free measure on the whole tree."""
    cov = root_correlations(tree, params, FREE)
    return np.array([cov[tree.depth == r].sum() for r in radii])


def simon_violation(tree: RootedTree, params: IsingParams) -> float:
    """Largest ``lhs - rhs`` of the tree two-point inequality over all admissible triples.

    For ``k`` in the tree and an edge ``(i, j)`` on the root-to-``k`` path with ``j``
    the child: lhs is ``<x_o; x_k>`` on the full tree, rhs is
    ``cosh^2(2 beta + B_i)`` times ``<x_o; x_i>`` on the tree cut at ``depth(i)``
    times ``<x_j; x_k>`` on the subtree of ``j``. All measures are free.
    Nonpositive return means the inequality holds everywhere.
    """
    beta = params.beta
    fields = _node_fields(tree, params, FREE)
    tree = RootedTree(tree.parent, int(tree.depth.max()), field=fields)
    plain = IsingParams(beta)
    cov = root_correlations(tree, plain)
    cut = {t: root_correlations(tree.truncate(t), plain) for t in range(int(tree.depth.max()) + 1)}
    sub_cov = {}
    for j in range(1, tree.n):
        sub, members = tree.subtree(j)
        sub_cov[j] = dict(zip(members.tolist(), root_correlations(sub, plain).tolist()))
    worst = -math.inf
    for k in range(1, tree.n):
        path = tree.path_to_root(k)[::-1]
        for i, j in zip(path[:-1], path[1:]):
            t = int(tree.depth[i])
            rhs = math.cosh(2 * beta + fields[i]) ** 2 * cut[t][i] * sub_cov[j][k]
            worst = max(worst, float(cov[k] - rhs))
    return worst
