import math

import numpy as np
import pytest

from tree_ising.core import IsingParams, ParameterError, rng
from tree_ising.exact import boltzmann_distribution, enumerate_ising, exact_phi_n, tv_distance
from tree_ising.graphs import Graph, cycle_graph, gen_erdos_renyi, gen_random_regular
from tree_ising.montecarlo import (
    MCConfig,
    SpinState,
    batch_means,
    coupled_sweeps,
    default_burn_in,
    empirical_distribution,
    estimate_energy,
    glauber_sweep,
    simpson_weights,
    thermo_integrate,
    thread_count,
)


def _xx(dist: np.ndarray) -> float:
    """<x0 x1> from a 4-state histogram indexed by spin bits."""
    return float(dist[0] - dist[1] - dist[2] + dist[3])


def test_spin_state_cache():
    g = gen_erdos_renyi(50, 2.0, 0)
    gen = rng(0, "state")
    s = SpinState.random(g, gen)
    assert s.consistent(g)
    glauber_sweep(g, IsingParams(0.7, 0.1), s, gen, sweeps=20)
    assert s.consistent(g)
    assert s.edge_sum(g) == int(sum(s.spins[i] * s.spins[j] for i, j in g.edges.tolist()))
    with pytest.raises(ParameterError):
        SpinState.from_spins(g, np.zeros(g.n))


def test_beta_zero_single_site_mean():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    B = 0.4
    updates = 400_000
    dist = empirical_distribution(g, IsingParams(0.0, B), updates, seed=1)
    mags = boltzmann_distribution(g, IsingParams(0.0, B))
    emp = np.mean([_mag(dist, g.n, v) for v in range(g.n)])
    # each spin is redrawn every n updates on average, so tau_int ~ 2n updates
    sigma = math.sqrt(2 * (1 - math.tanh(B) ** 2) / updates)
    assert abs(emp - math.tanh(B)) <= 3 * sigma
    assert tv_distance(dist, mags.probs) <= 0.01


def _mag(dist, n, v):
    codes = np.arange(2**n)
    return float(dist @ np.where((codes >> v) & 1, 1.0, -1.0))


def test_infinite_field_is_absorbing():
    g = cycle_graph(12)
    p = IsingParams(0.3, 0.0, per_vertex_fields=np.full(12, math.inf))
    gen = rng(3, "abs")
    s = SpinState.uniform(g, -1)
    glauber_sweep(g, p, s, gen, sweeps=30)
    assert np.all(s.spins == 1)
    glauber_sweep(g, p, s, gen, sweeps=30)
    assert np.all(s.spins == 1) and s.consistent(g)


def test_single_edge_detailed_balance(edge_graph):
    p = IsingParams(0.5, 0.2)
    dist = empirical_distribution(edge_graph, p, 1_000_000, seed=0)
    exact = boltzmann_distribution(edge_graph, p).probs
    assert tv_distance(dist, exact) <= 0.01


def test_single_edge_correlation(edge_graph):
    p = IsingParams(0.5, 0.2)
    runs = [_xx(empirical_distribution(edge_graph, p, 100_000, seed=s)) for s in range(10)]
    target = float(enumerate_ising(edge_graph, p).edge_correlations[0])
    se = np.std(runs, ddof=1) / math.sqrt(len(runs))
    assert abs(np.mean(runs) - target) <= 3 * se


def test_coupled_chains_keep_order():
    g = gen_random_regular(200, 3, 1)
    p = IsingParams(0.9, 0.05)
    gen = rng(5, "coupled")
    low, high = SpinState.uniform(g, -1), SpinState.uniform(g, 1)
    for _ in range(40):
        coupled_sweeps(g, p, low, high, gen)
        assert np.all(low.spins <= high.spins)
    assert low.consistent(g) and high.consistent(g)


def test_default_burn_in():
    assert default_burn_in(10_000) == math.ceil(10 * math.log(10_000))
    assert default_burn_in(1) >= 1


def test_batch_means():
    x = np.arange(100, dtype=float)
    m, se = batch_means(x)
    assert m == 49.5 and se > 0
    assert batch_means(np.ones(200)) == (1.0, 0.0)


def test_estimate_energy_beta_zero():
    g = gen_erdos_renyi(400, 1.5, 2)
    B = 0.5
    e, se = estimate_energy(g, IsingParams(0.0, B), burn_in=5, measure=2000, seed=0)
    assert abs(e - g.m / g.n * math.tanh(B) ** 2) <= 3 * se
    with pytest.raises(ParameterError):
        estimate_energy(g, IsingParams(0.0, B), measure=50)


def test_estimate_energy_small_graph_matches_enumeration():
    g = gen_erdos_renyi(12, 2.5, 4)
    p = IsingParams(0.6, 0.2)
    e, se = estimate_energy(g, p, burn_in=100, measure=40_000, seed=1)
    target = float(enumerate_ising(g, p).edge_correlations.sum()) / g.n
    assert abs(e - target) <= 3 * se


def test_estimate_energy_saturates():
    g = gen_random_regular(100, 3, 0)
    e, se = estimate_energy(g, IsingParams(0.5, 12.0), measure=200, seed=0)
    assert abs(e - g.m / g.n) <= max(3 * se, 1e-9)


def test_estimate_energy_reproducible():
    g = cycle_graph(30)
    p = IsingParams(0.7, 0.1)
    assert estimate_energy(g, p, measure=200, seed=9) == estimate_energy(g, p, measure=200, seed=9)


def test_simpson_weights_integrate_cubics_exactly():
    grid = np.linspace(0, 0.8, 9)
    W = simpson_weights(grid)
    f = grid**3 - 2 * grid
    assert W[-1] @ f == pytest.approx(0.8**4 / 4 - 0.8**2, abs=1e-14)
    assert np.all(W[0] == 0)


def test_thermo_integrate_anchor_and_validation():
    g = cycle_graph(10)
    res = thermo_integrate(g, 0.3, [0.0], MCConfig(measure=100))
    anchor = math.log(2 * math.cosh(0.3))
    assert res.phi[0] == pytest.approx(anchor, abs=1e-15) and res.phi_stderr[0] == 0
    res = thermo_integrate(g, 0.3, np.linspace(0, 0.2, 3), MCConfig(measure=100))
    assert res.phi[0] == pytest.approx(anchor, abs=1e-15)
    with pytest.raises(ParameterError):
        thermo_integrate(g, 0.3, [0.1, 0.2])
    with pytest.raises(ParameterError):
        thermo_integrate(g, 0.3, [0.0, 0.2])
    with pytest.raises(ParameterError):
        thermo_integrate(g, math.inf, [0.0, 0.1])
    with pytest.raises(ParameterError):
        thermo_integrate(g, 0.3, [0.0, 0.1, 0.3 - 0.2, 0.2])


def test_thermo_integrate_cycle():
    g = cycle_graph(18)
    p = IsingParams(0.8, 0.3)
    res = thermo_integrate(g, 0.3, np.linspace(0, 0.8, 9), MCConfig(burn_in=50, measure=20_000, seed=0))
    target = exact_phi_n(g, p)
    assert abs(res.phi[-1] - target) <= max(3 * res.phi_stderr[-1], 1e-3)


def test_thermo_integrate_thread_invariant(monkeypatch):
    g = gen_random_regular(200, 3, 0)
    grid = np.linspace(0, 0.4, 5)
    cfg = MCConfig(measure=200, seed=3)
    one = thermo_integrate(g, 0.2, grid, cfg, threads=1)
    many = thermo_integrate(g, 0.2, grid, cfg, threads=4)
    assert np.array_equal(one.phi, many.phi) and np.array_equal(one.energy, many.energy)
    monkeypatch.setenv("TREE_ISING_THREADS", "3")
    assert thread_count() == 3


@pytest.mark.slow
def test_energy_nondecreasing_in_beta():
    g = gen_random_regular(10_000, 3, 0)
    prev = None
    for beta in (0.1, 0.3, 0.5, 0.7, 0.9):
        e, se = estimate_energy(g, IsingParams(beta, 0.2), measure=300, seed=1)
        if prev is not None:
            assert e >= prev[0] - 3 * math.hypot(se, prev[1])
        prev = (e, se)
