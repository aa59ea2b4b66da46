"""Belief propagation in cavity-field form.

A message ``h[d]`` on directed edge ``d = i -> j`` encodes
``nu_{i->j}(x) ∝ exp(h x)``, so the normalized update
``nu'(x) ∝ e^{B x} prod_l sum_y e^{beta x y} nu_{l->i}(y)`` becomes

    h'_{i->j} = B_i + sum_{l in ∂i \\ j} xi(beta, h_{l->i})

and the per-message normalizer disappears.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from tree_ising.core import CapacityError, IsingParams, ParameterError, SpinDistribution, log_cosh, xi
from tree_ising.exact import marginal_on_subset
from tree_ising.graphs import Graph, ball

MAX_SWEEPS = 10_000
TOL = 1e-10
MAX_LOCAL_SPINS = 20


@dataclass(frozen=True, eq=False)
class MessageSet:
    host: Graph
    h: np.ndarray

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        if h.shape != (2 * self.host.m,):
            raise ParameterError("one message per directed edge required")
        if np.any(np.isnan(h)) or np.any(np.isneginf(h)):
            raise ParameterError("messages must be finite or +inf")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    def probabilities(self) -> np.ndarray:
        """``(nu(+1), nu(-1))`` per directed edge."""
        t = np.tanh(self.h)
        return np.stack([(1 + t) / 2, (1 - t) / 2], axis=1)

    @property
    def is_positive(self) -> bool:
        return bool(np.all(self.h >= 0))

    def message(self, i: int, j: int) -> float:
        return float(self.h[self.host.directed_edge_index(i, j)])


def init_messages(g: Graph, kind="free") -> MessageSet:
    """``"free"`` (all 0), ``"plus"`` (all +inf) or a constant ``c >= 0``."""
    if isinstance(kind, str):
        if kind == "free":
            c = 0.0
        elif kind == "plus":
            c = math.inf
        else:
            raise ParameterError(f"unknown init {kind!r}")
    else:
        c = float(kind)
        if not c >= 0:
            raise ParameterError("constant initialization must be >= 0")
    return MessageSet(g, np.full(2 * g.m, c))


def _incoming_sums(g: Graph, x: np.ndarray) -> np.ndarray:
    return np.bincount(g.dst, weights=x, minlength=g.n)


@numba.njit(cache=True, nogil=True)
def _leave_one_out(offsets, order, x, out):
    """``out[i->j] = sum_{l in ∂i, l != j} x[l->i]`` from prefix and suffix sums.

    The excluded term never enters the sum, so once the other incoming values
    are fixed the output is fixed to the last bit.
    """
    pre = np.empty(order.size)
    for i in range(offsets.size - 1):
        lo, hi = offsets[i], offsets[i + 1]
        acc = 0.0
        for a in range(lo, hi):
            pre[a] = acc
            acc += x[order[a] ^ 1]
        acc = 0.0
        for a in range(hi - 1, lo - 1, -1):
            out[order[a]] = pre[a] + acc
            acc += x[order[a] ^ 1]


def bp_sweep(g: Graph, params: IsingParams, msgs: MessageSet, damping: float = 0.0):
    """One synchronous update of every message; returns ``(new, max_change)``.

    ``max_change`` is the sup over directed edges of ``|tanh h' - tanh h|``.
    """
    if msgs.host is not g:
        raise ParameterError("messages belong to a different graph")
    fields = params.fields(g.n)
    x = np.asarray(xi(params.beta, msgs.h), dtype=float)
    offsets, order = g._csr
    others = np.empty(2 * g.m)
    _leave_one_out(offsets, order, x, others)
    new = fields[g.src] + others
    if damping:
        if not 0 <= damping < 1:
            raise ParameterError("damping must lie in [0, 1)")
        new = (1 - damping) * new + damping * msgs.h
    change = float(np.max(np.abs(np.tanh(new) - np.tanh(msgs.h)), initial=0.0))
    return MessageSet(g, new), change


@dataclass
class BPResult:
    messages: MessageSet
    sweeps: int
    residuals: list[float] = field(default_factory=list)
    converged: bool = False
    guaranteed: bool = True

    @property
    def residual(self) -> float:
        return self.residuals[-1] if self.residuals else math.inf


def bp_fixed_point(
    g: Graph,
    params: IsingParams,
    init="free",
    tol: float = TOL,
    max_sweeps: int = MAX_SWEEPS,
    damping: float = 0.0,
) -> BPResult:
    """Iterate :func:`bp_sweep` until the tanh-space change is at most ``tol``.

    Convergence to a unique fixed point from every positive start holds for
    ``B > 0``; ``B <= 0`` runs anyway with ``guaranteed=False`` and a warning.
    Non-convergence is reported through ``converged=False``, not raised.
    """
    if not tol > 0:
        raise ParameterError("tol must be positive")
    fields = params.fields(g.n)
    guaranteed = bool(np.all(fields > 0))
    if not guaranteed:
        warnings.warn("BP convergence is only guaranteed for strictly positive fields")
    msgs = init if isinstance(init, MessageSet) else init_messages(g, init)
    residuals: list[float] = []
    for sweep in range(1, max_sweeps + 1):
        msgs, change = bp_sweep(g, params, msgs, damping)
        residuals.append(change)
        if change <= tol:
            return BPResult(msgs, sweep, residuals, True, guaranteed)
    return BPResult(msgs, max_sweeps, residuals, False, guaranteed)


def cavity_totals(g: Graph, params: IsingParams, msgs: MessageSet) -> np.ndarray:
    """Full field ``B_i + sum_{l in ∂i} xi(beta, h_{l->i})`` at every vertex."""
    return params.fields(g.n) + _incoming_sums(g, xi(params.beta, msgs.h))


def vertex_magnetizations(g: Graph, params: IsingParams, msgs: MessageSet) -> np.ndarray:
    return np.tanh(cavity_totals(g, params, msgs))


def vertex_marginal(g: Graph, params: IsingParams, msgs: MessageSet, i: int) -> float:
    return float(vertex_magnetizations(g, params, msgs)[i])


def edge_correlation(g: Graph, params: IsingParams, msgs: MessageSet, e) -> float:
    """``<x_i x_j>`` under ``∝ exp(beta x_i x_j + h_{i->j} x_i + h_{j->i} x_j)``."""
    d = g.directed_edge_index(*e) if isinstance(e, tuple) else 2 * int(e)
    u = math.tanh(params.beta)
    ti, tj = math.tanh(msgs.h[d]), math.tanh(msgs.h[d ^ 1])
    val = (u + ti * tj) / (1 + u * ti * tj)
    return float(min(1.0, max(-1.0, val)))


def edge_correlations(g: Graph, params: IsingParams, msgs: MessageSet) -> np.ndarray:
    u = math.tanh(params.beta)
    t = np.tanh(msgs.h)
    p = t[0::2] * t[1::2]
    return np.clip((u + p) / (1 + u * p), -1.0, 1.0)


def local_marginal(g: Graph, params: IsingParams, msgs: MessageSet, i_star: int, r: int) -> SpinDistribution:
    """Ball marginal built from BP messages at the ball boundary.

    Boltzmann weights on the edges inside ``U = ball(i_star, r)`` with field ``B_i``
    inside, while each boundary vertex ``i`` instead carries the message
    ``h_{i -> j(i)}`` to its lowest-labeled neighbor ``j(i)`` in ``U``. A boundary
    vertex with no neighbor in ``U`` (only ``r = 0``) carries its full BP field.
    """
    b = ball(g, i_star, r)
    if len(b.vertices) > MAX_LOCAL_SPINS:
        raise CapacityError(f"ball has {len(b.vertices)} vertices, limit {MAX_LOCAL_SPINS}")
    fields = params.fields(g.n)
    inside = set(b.vertices)
    boundary = set(b.boundary)
    totals = None
    local = np.empty(len(b.vertices))
    for a, v in enumerate(b.vertices):
        if v not in boundary:
            local[a] = fields[v]
            continue
        nb = [w for w in g.neighbors(v).tolist() if w in inside]
        if nb:
            local[a] = msgs.h[g.directed_edge_index(v, min(nb))]
        else:
            if totals is None:
                totals = cavity_totals(g, params, msgs)
            local[a] = totals[v]
    sub = marginal_on_subset(b.subgraph, params.with_fields(local), range(len(b.vertices)))
    return SpinDistribution(b.vertices, sub.probs)


def reorder(dist: SpinDistribution, vertices) -> SpinDistribution:
    """Same law with the bits relabeled to follow ``vertices``."""
    vertices = tuple(int(v) for v in vertices)
    if sorted(vertices) != sorted(dist.vertices):
        raise ParameterError("vertex sets differ")
    k = len(vertices)
    src_pos = [dist.vertices.index(v) for v in vertices]
    c = np.arange(2**k, dtype=np.int64)
    src_index = np.zeros_like(c)
    for b, sp in enumerate(src_pos):
        src_index |= ((c >> b) & 1) << sp
    return SpinDistribution(vertices, dist.probs[src_index])


def bethe_free_entropy(g: Graph, params: IsingParams, msgs: MessageSet) -> float:
    """Finite-graph Bethe free entropy per vertex.

    ``(1/n)[sum_i log(e^{B_i} prod (1 + u t_{l->i}) + e^{-B_i} prod (1 - u t_{l->i}))
    - sum_{ij} log(1 + u t_{i->j} t_{j->i}) + |E| log cosh beta]``; exact on trees.
    """
    fields = params.fields(g.n)
    if not np.all(np.isfinite(fields)):
        raise ParameterError("Bethe free entropy needs finite fields")
    beta = params.beta
    u = math.tanh(beta)
    t = np.tanh(msgs.h)
    # log(1 ± u t) per incoming message, summed at its head vertex
    lp = _incoming_sums(g, np.log1p(u * t))
    lm = _incoming_sums(g, np.log1p(-u * t))
    vertex = np.logaddexp(fields + lp, -fields + lm)
    edge = np.log1p(u * t[0::2] * t[1::2])
    total = vertex.sum() - edge.sum() + g.m * float(log_cosh(beta))
    return float(total / g.n)
