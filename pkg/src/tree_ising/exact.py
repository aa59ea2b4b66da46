"""Brute-force enumeration of the Boltzmann distribution on small graphs.

This is the oracle for everything else, so it shares no kernels with the tree
recursion or BP: it sums explicit Boltzmann weights over all configurations of
the unpinned spins, in fixed-size blocks, accumulating in log space against a
running maximum. Vertices with field ``+inf`` are pinned to ``+1`` (the other
configurations are excluded) and contribute no field factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from tree_ising.core import (
    CapacityError,
    IsingParams,
    ParameterError,
    SpinDistribution,
    spin_configurations,
)
from tree_ising.graphs import Graph

MAX_SPINS = 24
MAX_SUBSET = 20
BLOCK_BITS = 16


@dataclass(frozen=True)
class ExactSolution:
    log_partition: float
    magnetizations: np.ndarray
    edge_correlations: np.ndarray


class _Accumulator:
    """Running ``sum w * values`` with weights stored relative to ``exp(shift)``."""

    def __init__(self, width: int):
        self.shift = -math.inf
        self.total = 0.0
        self.sums = np.zeros(width)

    def add(self, logw: np.ndarray, values: np.ndarray | None):
        top = float(logw.max())
        if top > self.shift:
            scale = math.exp(self.shift - top) if math.isfinite(self.shift) else 0.0
            self.total *= scale
            self.sums *= scale
            self.shift = top
        w = np.exp(logw - self.shift)
        self.total += float(w.sum())
        if values is not None:
            self.sums += w @ values

    @property
    def log_total(self) -> float:
        return self.shift + math.log(self.total)


def _blocks(g: Graph, params: IsingParams, max_spins: int = MAX_SPINS):
    """Yield ``(spins, log_weight)`` blocks over all admissible configurations."""
    if g.n > max_spins:
        raise CapacityError(f"enumeration limited to {max_spins} spins, got {g.n}")
    fields = params.fields(g.n)
    pinned = np.isposinf(fields)
    free = np.flatnonzero(~pinned)
    k = free.size
    fr = np.where(pinned, 0.0, fields)
    a, b = g.edges[:, 0], g.edges[:, 1]
    total = 1 << k
    step = 1 << min(k, BLOCK_BITS)
    for start in range(0, total, step):
        c = np.arange(start, min(start + step, total), dtype=np.int64)
        x = np.ones((c.size, g.n), dtype=np.float64)
        x[:, free] = 2.0 * ((c[:, None] >> np.arange(k, dtype=np.int64)) & 1) - 1.0
        logw = params.beta * np.sum(x[:, a] * x[:, b], axis=1) + x @ fr
        yield c, x, logw


def enumerate_ising(g: Graph, params: IsingParams) -> ExactSolution:
    """Exact ``log Z``, magnetizations and edge correlations by full enumeration."""
    acc = _Accumulator(g.n + g.m)
    a, b = g.edges[:, 0], g.edges[:, 1]
    for _, x, logw in _blocks(g, params):
        acc.add(logw, np.concatenate([x, x[:, a] * x[:, b]], axis=1))
    mean = acc.sums / acc.total
    return ExactSolution(acc.log_total, mean[: g.n], mean[g.n :])


def marginal_on_subset(g: Graph, params: IsingParams, U: Sequence[int]) -> SpinDistribution:
    """Exact marginal law of ``x_U`` (bit ``b`` of the index is vertex ``U[b]``)."""
    U = tuple(int(u) for u in U)
    if len(U) > MAX_SUBSET:
        raise CapacityError(f"subset marginals limited to {MAX_SUBSET} vertices")
    if len(set(U)) != len(U) or any(not 0 <= u < g.n for u in U):
        raise ParameterError("invalid subset")
    weights = np.arange(len(U), dtype=np.int64)
    shift = -math.inf
    probs = np.zeros(2 ** len(U))
    for _, x, logw in _blocks(g, params):
        idx = ((x[:, list(U)] > 0).astype(np.int64) << weights).sum(axis=1) if U else np.zeros(x.shape[0], dtype=np.int64)
        top = float(logw.max())
        if top > shift:
            probs *= math.exp(shift - top) if math.isfinite(shift) else 0.0
            shift = top
        probs += np.bincount(idx, weights=np.exp(logw - shift), minlength=probs.size)
    return SpinDistribution(U, probs / probs.sum())


def boltzmann_distribution(g: Graph, params: IsingParams) -> SpinDistribution:
    return marginal_on_subset(g, params, range(g.n))


def tv_distance(p, q) -> float:
    """Total variation ``(1/2) sum |p - q|`` on a common finite index set."""
    if isinstance(p, SpinDistribution) or isinstance(q, SpinDistribution):
        if not (isinstance(p, SpinDistribution) and isinstance(q, SpinDistribution)):
            raise ParameterError("cannot compare a SpinDistribution with a bare array")
        if p.vertices != q.vertices:
            raise ParameterError(f"vertex sets differ: {p.vertices} vs {q.vertices}")
        p, q = p.probs, q.probs
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ParameterError("distributions have different supports")
    if abs(p.sum() - 1) > 1e-9 or abs(q.sum() - 1) > 1e-9:
        raise ParameterError("distributions must be normalized")
    return float(min(1.0, 0.5 * np.abs(p - q).sum()))


def exact_phi_n(g: Graph, params: IsingParams) -> float:
    """``(1/n) log Z``."""
    return enumerate_ising(g, params).log_partition / g.n


def cycle_transfer_eigenvalues(beta: float, field: float) -> tuple[float, float]:
    """Eigenvalues of the symmetric chain transfer matrix ``exp(b x y + B (x + y)/2)``."""
    c = math.exp(beta) * math.cosh(field)
    r = math.sqrt(math.exp(2 * beta) * math.sinh(field) ** 2 + math.exp(-2 * beta))
    return c + r, c - r


def cycle_log_partition(n: int, beta: float, field: float) -> float:
    """``log tr T^n`` for the ``n``-cycle."""
    l1, l2 = cycle_transfer_eigenvalues(beta, field)
    return n * math.log(l1) + math.log1p((l2 / l1) ** n)


def chain_free_entropy(beta: float, field: float) -> float:
    """``log`` of the top transfer-matrix eigenvalue (infinite-chain free entropy)."""
    return math.log(cycle_transfer_eigenvalues(beta, field)[0])


# -- batched enumeration over many graphs with the same vertex count ----------


def pair_index(n: int) -> np.ndarray:
    """Row ``p`` lists the vertex pair ``(i, j)``, ``i < j``, of pair slot ``p``."""
    return np.array([(i, j) for i in range(n) for j in range(i + 1, n)], dtype=np.int64).reshape(-1, 2)


def edge_masks(n: int, graphs: Iterable[Graph]) -> np.ndarray:
    """0/1 matrix (graph x pair slot) of edge indicators."""
    pairs = pair_index(n)
    slot = {tuple(p): s for s, p in enumerate(pairs.tolist())}
    out = []
    for g in graphs:
        row = np.zeros(len(pairs))
        for a, b in g.edges.tolist():
            row[slot[(min(a, b), max(a, b))]] += 1
        out.append(row)
    return np.array(out, dtype=float).reshape(len(out), len(pairs))


def batch_moments(n: int, masks: np.ndarray, beta: float, fields: np.ndarray):
    """Magnetizations and all pair correlations for many graphs at once.

    ``masks`` is (G, n(n-1)/2); ``fields`` is (n,) or (F, n). Returns arrays of
    shape (G, F, n) and (G, F, n(n-1)/2) (F axis dropped for a single field vector).
    """
    if n > 12:
        raise CapacityError("batched enumeration is for small graphs")
    x = spin_configurations(n).astype(np.float64)
    pairs = pair_index(n)
    xx = x[:, pairs[:, 0]] * x[:, pairs[:, 1]]
    single = np.ndim(fields) == 1
    F = np.atleast_2d(np.asarray(fields, dtype=float))
    coupling = beta * (np.asarray(masks, dtype=float) @ xx.T)  # (G, C)
    zeeman = F @ x.T  # (F, C)
    logw = coupling[:, None, :] + zeeman[None, :, :]
    logw -= logw.max(axis=2, keepdims=True)
    w = np.exp(logw)
    w /= w.sum(axis=2, keepdims=True)
    mags = w @ x
    corr = w @ xx
    if single:
        return mags[:, 0], corr[:, 0]
    return mags, corr
