"""Heat-bath Glauber dynamics and thermodynamic integration of ``(1/n) log Z``.

The derivative identity ``d phi_n / d beta = (1/n) sum_{(i,j) in E} <x_i x_j>``
turns a sequence of energy estimates on a beta grid into ``phi_n`` anchored at
``phi_n(0, B) = log(2 cosh B)``.

Sweeps draw all site choices and uniforms up front from a named stream and
hand them to a compiled kernel, so runs are reproducible and two chains fed
the same numbers are coupled.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np
from scipy.integrate import cumulative_simpson

from tree_ising.core import IsingParams, ParameterError, log_2cosh, rng
from tree_ising.graphs import Graph

N_BATCHES = 20
THREADS_ENV = "TREE_ISING_THREADS"
MIN_SPACING = 1e-6  # closer grid points make Simpson weights blow up


def thread_count() -> int:
    val = os.environ.get(THREADS_ENV)
    if val:
        return max(1, int(val))
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


@dataclass(eq=False)
class SpinState:
    """Spins plus the cached neighbor sums ``local[i] = sum_{j in ∂i} x_j``."""

    spins: np.ndarray
    local: np.ndarray

    @classmethod
    def uniform(cls, g: Graph, value: int = 1) -> "SpinState":
        return cls.from_spins(g, np.full(g.n, value, dtype=np.int8))

    @classmethod
    def random(cls, g: Graph, gen: np.random.Generator) -> "SpinState":
        return cls.from_spins(g, (2 * gen.integers(0, 2, g.n) - 1).astype(np.int8))

    @classmethod
    def from_spins(cls, g: Graph, spins) -> "SpinState":
        spins = np.asarray(spins, dtype=np.int8).copy()
        if spins.shape != (g.n,) or not np.all(np.abs(spins) == 1):
            raise ParameterError("spins must be a ±1 vector of length n")
        local = np.bincount(g.dst, weights=spins[g.src], minlength=g.n).astype(np.int64)
        return cls(spins, local)

    def copy(self) -> "SpinState":
        return SpinState(self.spins.copy(), self.local.copy())

    def edge_sum(self, g: Graph) -> int:
        """``sum_{(i,j) in E} x_i x_j``."""
        return int(self.spins.astype(np.int64) @ self.local) // 2

    def consistent(self, g: Graph) -> bool:
        return bool(np.array_equal(self.local, SpinState.from_spins(g, self.spins).local))


@dataclass(frozen=True)
class _Kernel:
    indptr: np.ndarray
    nbrs: np.ndarray
    fields: np.ndarray
    beta: float


def _kernel(g: Graph, params: IsingParams) -> _Kernel:
    indptr, order = g._csr
    nbrs = g.dst[order].astype(np.int64)
    return _Kernel(indptr, nbrs, params.fields(g.n).astype(np.float64), float(params.beta))


@numba.njit(cache=True, nogil=True)
def _heat_bath(indptr, nbrs, fields, beta, spins, local, sites, uniforms, record):
    """Heat-bath updates at ``sites``; returns the running edge-sum change.

    When ``record`` has one slot per sweep of ``n`` updates, the edge sum is
    written there after each sweep (relative to the starting value).
    """
    n = spins.size
    delta = 0
    for s in range(sites.size):
        i = sites[s]
        p = 0.5 * (1.0 + math.tanh(beta * local[i] + fields[i]))
        new = 1 if uniforms[s] < p else -1
        old = spins[i]
        if new != old:
            spins[i] = new
            dx = new - old
            delta += dx * local[i]
            for a in range(indptr[i], indptr[i + 1]):
                local[nbrs[a]] += dx
        if record.size > 0 and (s + 1) % n == 0:
            record[(s + 1) // n - 1] = delta
    return delta


def _draws(gen: np.random.Generator, n: int, sweeps: int):
    return gen.integers(0, n, size=n * sweeps), gen.random(n * sweeps)


_EMPTY = np.zeros(0, dtype=np.int64)


def glauber_sweep(g: Graph, params: IsingParams, state: SpinState, gen: np.random.Generator, sweeps: int = 1) -> SpinState:
    """``sweeps * n`` heat-bath updates at uniform random sites, in place."""
    k = _kernel(g, params)
    sites, u = _draws(gen, g.n, sweeps)
    _heat_bath(k.indptr, k.nbrs, k.fields, k.beta, state.spins, state.local, sites, u, _EMPTY)
    return state


def coupled_sweeps(g: Graph, params: IsingParams, low: SpinState, high: SpinState, gen, sweeps: int = 1):
    """Advance two chains with the same site choices and uniforms.

    Heat-bath is monotone, so ``low <= high`` coordinatewise is preserved.
    """
    k = _kernel(g, params)
    sites, u = _draws(gen, g.n, sweeps)
    _heat_bath(k.indptr, k.nbrs, k.fields, k.beta, low.spins, low.local, sites, u, _EMPTY)
    _heat_bath(k.indptr, k.nbrs, k.fields, k.beta, high.spins, high.local, sites, u, _EMPTY)
    return low, high


@numba.njit(cache=True, nogil=True)
def _trace_codes(indptr, nbrs, fields, beta, spins, local, sites, uniforms, counts):
    """Heat-bath updates that histogram the full configuration after each one."""
    n = spins.size
    for s in range(sites.size):
        i = sites[s]
        p = 0.5 * (1.0 + math.tanh(beta * local[i] + fields[i]))
        new = 1 if uniforms[s] < p else -1
        old = spins[i]
        if new != old:
            spins[i] = new
            dx = new - old
            for a in range(indptr[i], indptr[i + 1]):
                local[nbrs[a]] += dx
        code = 0
        for b in range(n):
            if spins[b] > 0:
                code |= 1 << b
        counts[code] += 1


def empirical_distribution(g: Graph, params: IsingParams, updates: int, seed: int, burn_in: int = 1000) -> np.ndarray:
    """Visit frequencies of all ``2**n`` configurations (indexed as in enumeration)."""
    if g.n > 16:
        raise ParameterError("configuration histograms are for tiny graphs")
    gen = rng(seed, "empirical_distribution")
    state = SpinState.random(g, gen)
    k = _kernel(g, params)
    sites, u = gen.integers(0, g.n, burn_in), gen.random(burn_in)
    _heat_bath(k.indptr, k.nbrs, k.fields, k.beta, state.spins, state.local, sites, u, _EMPTY)
    counts = np.zeros(2**g.n, dtype=np.int64)
    sites, u = gen.integers(0, g.n, updates), gen.random(updates)
    _trace_codes(k.indptr, k.nbrs, k.fields, k.beta, state.spins, state.local, sites, u, counts)
    return counts / counts.sum()


@dataclass(frozen=True)
class MCConfig:
    burn_in: int | None = None  # sweeps; None means the coupled-chain rule
    measure: int = 2000
    seed: int = 0
    coalescence_tol: float = 1e-3


def default_burn_in(n: int) -> int:
    """``10 n ln n`` site updates expressed in sweeps."""
    return max(1, math.ceil(10 * math.log(max(n, 2))))


def burn_in_coupled(g: Graph, params: IsingParams, gen, max_sweeps: int, tol: float) -> tuple[SpinState, int]:
    """Run all-minus and all-plus chains together until their energy densities
    agree within ``tol`` or ``max_sweeps`` pass; returns the plus chain."""
    low, high = SpinState.uniform(g, -1), SpinState.uniform(g, 1)
    for sweep in range(1, max_sweeps + 1):
        coupled_sweeps(g, params, low, high, gen)
        if abs(high.edge_sum(g) - low.edge_sum(g)) <= tol * g.n:
            return high, sweep
    return high, max_sweeps


def batch_means(x: np.ndarray, batches: int = N_BATCHES) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    usable = x.size - x.size % batches
    means = x[x.size - usable :].reshape(batches, -1).mean(axis=1)
    return float(x.mean()), float(means.std(ddof=1) / math.sqrt(batches))


def energy_trace(g: Graph, params: IsingParams, burn_in: int | None = None, measure: int = 2000, seed: int = 0,
                 stream: tuple = (), coalescence_tol: float = 1e-3) -> np.ndarray:
    """Per-sweep samples of ``(1/n) sum_E x_i x_j`` after burn-in."""
    gen = rng(seed, "estimate_energy", *stream)
    if burn_in is None:
        state, _ = burn_in_coupled(g, params, gen, default_burn_in(g.n), coalescence_tol)
    else:
        state = SpinState.uniform(g, 1)
        if burn_in:
            glauber_sweep(g, params, state, gen, burn_in)
    k = _kernel(g, params)
    base = state.edge_sum(g)
    out = np.empty(measure)
    done = 0
    chunk = max(1, min(measure, 500))
    while done < measure:
        s = min(chunk, measure - done)
        sites, u = _draws(gen, g.n, s)
        rec = np.zeros(s, dtype=np.int64)
        total = _heat_bath(k.indptr, k.nbrs, k.fields, k.beta, state.spins, state.local, sites, u, rec)
        out[done : done + s] = base + rec
        base += total
        done += s
    return out / g.n


def estimate_energy(g: Graph, params: IsingParams, burn_in: int | None = None, measure: int = 2000, seed: int = 0,
                    stream: tuple = (), coalescence_tol: float = 1e-3) -> tuple[float, float]:
    """Time-averaged energy density with a 20-batch-means standard error."""
    if measure < 100:
        raise ParameterError("measure at least 100 sweeps")
    return batch_means(energy_trace(g, params, burn_in, measure, seed, stream, coalescence_tol))


def simpson_weights(grid: np.ndarray) -> np.ndarray:
    """Matrix ``W`` with ``cumulative_simpson(y, x=grid, initial=0) == W @ y``."""
    eye = np.eye(grid.size)
    return cumulative_simpson(eye, x=grid, initial=0, axis=0)


@dataclass(frozen=True)
class TIResult:
    beta: np.ndarray
    energy: np.ndarray
    energy_stderr: np.ndarray
    phi: np.ndarray
    phi_stderr: np.ndarray


def thermo_integrate(g: Graph, B: float, beta_grid, config: MCConfig = MCConfig(), threads: int | None = None) -> TIResult:
    """``phi_n(beta) = log(2 cosh B) + int_0^beta e(b) db`` by composite Simpson.

    Grid points use independent random streams, so the estimates and their
    errors are uncorrelated and propagate through the quadrature weights.
    """
    grid = np.asarray(beta_grid, dtype=float)
    if grid.size < 1 or grid[0] != 0:
        raise ParameterError("beta grid must start at 0")
    if np.any(np.diff(grid) <= MIN_SPACING) or np.any(np.diff(grid) > 0.1 + 1e-12):
        raise ParameterError(f"beta grid must be increasing with spacing in ({MIN_SPACING}, 0.1]")
    if not math.isfinite(B):
        raise ParameterError("thermodynamic integration needs a finite field")

    def point(idx):
        params = IsingParams(float(grid[idx]), B)
        return estimate_energy(g, params, config.burn_in, config.measure, config.seed, (idx,), config.coalescence_tol)

    workers = threads or thread_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            res = list(ex.map(point, range(grid.size)))
    else:
        res = [point(i) for i in range(grid.size)]
    e = np.array([r[0] for r in res])
    se = np.array([r[1] for r in res])
    anchor = float(log_2cosh(B))
    if grid.size == 1:
        return TIResult(grid, e, se, np.array([anchor]), np.zeros(1))
    W = simpson_weights(grid)
    phi = anchor + W @ e
    phi_se = np.sqrt((W**2) @ (se**2))
    return TIResult(grid, e, se, phi, phi_se)
