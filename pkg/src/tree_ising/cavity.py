"""Density evolution for the cavity-field recursion and the Bethe free entropy.

The cavity field on a random tree obeys ``h' = B + sum_{i < K} xi(beta, h_i)``
in distribution, with ``K - 1`` distributed as the offspring law of the
size-biased degree distribution. A :class:`Population` of ``N`` samples stands
in for the law of ``h``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from tree_ising.core import IsingParams, ParameterError, log_cosh, rng, xi
from tree_ising.graphs import DegreeDistribution

MIN_POPULATION = 1000
MIN_MC_SAMPLES = 10_000
DEFAULT_POPULATION = 100_000
DEFAULT_MC_SAMPLES = 100_000
WINDOW = 10


@dataclass(frozen=True, eq=False)
class Population:
    samples: np.ndarray
    t: int = 0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size < MIN_POPULATION:
            raise ParameterError(f"population needs at least {MIN_POPULATION} samples")
        if not np.all(np.isfinite(s)):
            raise ParameterError("population samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def N(self) -> int:
        return self.samples.size

    def magnetization(self) -> float:
        """``E tanh(h)``, the cavity magnetization."""
        return float(np.tanh(self.samples).mean())


def population_init(N: int, value: float = 0.0) -> Population:
    """``N`` copies of ``value`` (zero is the free start) at generation 0."""
    if N < MIN_POPULATION:
        raise ParameterError(f"population needs at least {MIN_POPULATION} samples, got {N}")
    return Population(np.full(int(N), float(value)), 0)


def population_step(pop: Population, P: DegreeDistribution, params: IsingParams, seed: int, crn: bool = False) -> Population:
    """One generation: ``new_a = B + sum_{i < K_a} xi(beta, pop[J_ai])``.

    Randomness is drawn from the stream for generation ``pop.t``; with
    ``crn=True`` every generation reuses the generation-0 stream, so the
    update is one fixed monotone map and order is preserved sample by sample.
    """
    N = pop.N
    gen = rng(seed, "population_step", 0 if crn else pop.t)
    kids = P.sample_offspring(gen, N)
    J = gen.integers(0, N, size=int(kids.sum()))
    owner = np.repeat(np.arange(N), kids)
    contrib = xi(params.beta, pop.samples[J])
    new = params.field + np.bincount(owner, weights=contrib, minlength=N)
    return Population(new, pop.t + 1)


def w1_distance(a, b) -> float:
    """Wasserstein-1 distance between two empirical scalar laws."""
    a = np.asarray(a.samples if isinstance(a, Population) else a, dtype=float)
    b = np.asarray(b.samples if isinstance(b, Population) else b, dtype=float)
    if a.size == b.size:
        return float(np.mean(np.abs(np.sort(a) - np.sort(b))))
    return float(stats.wasserstein_distance(a, b))


@dataclass
class DensityEvolution:
    population: Population
    steps: int
    w1_history: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def w1(self) -> float:
        return self.w1_history[-1] if self.w1_history else math.inf


def default_tol(N: int) -> float:
    """Sampling floor for the W1 distance between consecutive generations."""
    return 2.0 / math.sqrt(N)


def population_fixed_point(
    P: DegreeDistribution,
    params: IsingParams,
    N: int = DEFAULT_POPULATION,
    seed: int = 0,
    tol: float | None = None,
    max_steps: int = 500,
    init: float | Population = 0.0,
    crn: bool = False,
    window: int = WINDOW,
    callback=None,
) -> DensityEvolution:
    """Iterate :func:`population_step` until W1 between consecutive generations
    stays at or below ``tol`` for ``window`` straight steps.

    Runs with the same ``seed`` share every generation's random numbers, so
    populations started from different points are coupled.
    """
    if params.field <= 0:
        warnings.warn("the fixed point is only guaranteed unique for B > 0")
    tol = default_tol(N) if tol is None else tol
    pop = init if isinstance(init, Population) else population_init(N, init)
    history: list[float] = []
    streak = 0
    for step in range(1, max_steps + 1):
        new = population_step(pop, P, params, seed, crn)
        d = w1_distance(pop, new)
        history.append(d)
        if callback is not None:
            callback(new, d)
        pop = new
        streak = streak + 1 if d <= tol else 0
        if streak >= window:
            return DensityEvolution(pop, step, history, True)
    return DensityEvolution(pop, max_steps, history, False)


def _check_mc(mc_samples: int):
    if mc_samples < MIN_MC_SAMPLES:
        raise ParameterError(f"mc_samples must be at least {MIN_MC_SAMPLES}")


def bethe_phi(
    P: DegreeDistribution,
    pop: Population,
    params: IsingParams,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo Bethe free entropy and its standard error.

    ``(Pbar/2) log cosh beta - (Pbar/2) E log(1 + u t1 t2)
    + E log(e^B prod_{i<=L}(1 + u t_i) + e^{-B} prod_{i<=L}(1 - u t_i))``
    with ``L ~ P`` and ``t = tanh h`` for ``h`` drawn uniformly from ``pop``.
    """
    _check_mc(mc_samples)
    beta, B = params.beta, params.field
    u = math.tanh(beta)
    pbar = P.mean
    t = np.tanh(pop.samples)
    gen = rng(seed, "bethe_phi")
    L = P.sample(gen, mc_samples)
    ti = t[gen.integers(0, pop.N, size=int(L.sum()))]
    owner = np.repeat(np.arange(mc_samples), L)
    lp = np.bincount(owner, weights=np.log1p(u * ti), minlength=mc_samples)
    lm = np.bincount(owner, weights=np.log1p(-u * ti), minlength=mc_samples)
    vertex = np.logaddexp(B + lp, -B + lm)
    pair = t[gen.integers(0, pop.N, size=(2, mc_samples))]
    edge = np.log1p(u * pair[0] * pair[1])
    y = vertex - 0.5 * pbar * edge
    phi = 0.5 * pbar * float(log_cosh(beta)) + float(y.mean())
    return phi, float(y.std(ddof=1) / math.sqrt(mc_samples))


def energy_density(
    P: DegreeDistribution,
    pop: Population,
    params: IsingParams,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
) -> float:
    """``(Pbar/2) E[(u + X1 X2) / (1 + u X1 X2)]`` with ``X = tanh h``."""
    _check_mc(mc_samples)
    u = math.tanh(params.beta)
    gen = rng(seed, "energy_density")
    X = np.tanh(pop.samples[gen.integers(0, pop.N, size=(2, mc_samples))])
    p = X[0] * X[1]
    return float(0.5 * P.mean * np.mean((u + p) / (1 + u * p)))


# -- regular trees: the cavity law is a point mass ---------------------------


def regular_fixed_point(k: int, params: IsingParams, xtol: float = 1e-14) -> float:
    """Unique positive root of ``h = B + (k-1) xi(beta, h)``."""
    if k < 1:
        raise ParameterError("regular degree must be at least 1")
    beta, B = params.beta, params.field
    if B <= 0:
        raise ParameterError("the regular fixed point needs B > 0")
    if beta == 0 or k == 1:
        return float(B)
    f = lambda h: B + (k - 1) * xi(beta, h) - h
    # f(B) >= 0 and f(B + (k-1) beta) <= 0 since 0 <= xi <= beta
    return float(optimize.brentq(f, B, B + (k - 1) * beta, xtol=xtol, rtol=4 * np.finfo(float).eps))


def phi_point_mass(k: int, params: IsingParams, h) -> float:
    """Bethe functional for degree ``k`` with every cavity field equal to ``h``."""
    beta, B = params.beta, params.field
    u = math.tanh(beta)
    t = math.tanh(h)
    vertex = np.logaddexp(B + k * math.log1p(u * t), -B + k * math.log1p(-u * t))
    return float(0.5 * k * (log_cosh(beta) - math.log1p(u * t * t)) + vertex)


def phi_two_point(k: int, params: IsingParams, h: float, eps: float) -> float:
    """Bethe functional, exact expectation, when fields are ``h ± eps`` with equal odds."""
    beta, B = params.beta, params.field
    u = math.tanh(beta)
    tp, tm = math.tanh(h + eps), math.tanh(h - eps)
    j = np.arange(k + 1)
    w = stats.binom.pmf(j, k, 0.5)
    lp = j * math.log1p(u * tp) + (k - j) * math.log1p(u * tm)
    lm = j * math.log1p(-u * tp) + (k - j) * math.log1p(-u * tm)
    vertex = float(w @ np.logaddexp(B + lp, -B + lm))
    edge = 0.25 * (math.log1p(u * tp * tp) + 2 * math.log1p(u * tp * tm) + math.log1p(u * tm * tm))
    return float(0.5 * k * (log_cosh(beta) - edge) + vertex)


def bethe_phi_regular(k: int, params: IsingParams) -> float:
    if params.beta == 0:
        return float(math.log(2.0) + log_cosh(params.field))
    return phi_point_mass(k, params, regular_fixed_point(k, params))


def energy_density_regular(k: int, params: IsingParams) -> float:
    if params.beta == 0:
        t2 = math.tanh(params.field) ** 2
    else:
        t2 = math.tanh(regular_fixed_point(k, params)) ** 2
    u = math.tanh(params.beta)
    return 0.5 * k * (u + t2) / (1 + u * t2)


def population_summary(pop: Population, w1_prev: float = math.nan) -> dict:
    q = np.quantile(pop.samples, [0.01, 0.25, 0.5, 0.75, 0.99])
    return {
        "t": pop.t,
        "mean": float(pop.samples.mean()),
        "std": float(pop.samples.std()),
        "q01": q[0], "q25": q[1], "q50": q[2], "q75": q[3], "q99": q[4],
        "w1_prev": w1_prev,
    }
