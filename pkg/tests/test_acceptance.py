"""Acceptance gate: one PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py -s`` or
``python tests/test_acceptance.py``. Each test also checks its wall time
against the budget for that criterion.
"""

import math
import sys
import time

import numpy as np
import pytest

from conftest import random_trees, report
from tree_ising import bp, cavity, exact, trees
from tree_ising.core import IsingParams, critical_beta, rng
from tree_ising.fitting import exp_decay_fit, loglog_fit, residual_tail
from tree_ising.graphs import DegreeDistribution, cycle_graph, gen_erdos_renyi, gen_random_regular
from tree_ising.inequalities import ghs_report, griffiths_report
from tree_ising.montecarlo import MCConfig, thermo_integrate

POI3 = DegreeDistribution.poisson(3.0)
REG3 = DegreeDistribution.regular(3)


class Clock:
    def __init__(self, budget_s: float):
        self.budget = budget_s
        self.t0 = time.perf_counter()

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def ok(self) -> bool:
        return self.elapsed < self.budget

    def __str__(self):
        return f"{self.elapsed:.1f}s of {self.budget:.0f}s"


def test_c01_tree_exactness():
    clock = Clock(60)
    gen = rng(1, "acceptance_tree_exactness")
    worst_m = worst_tv = 0.0
    checked = 0
    for g in random_trees(200, n_min=2, n_max=14, seed=101):
        p = IsingParams(float(gen.uniform(0, 2)), float(1 - gen.uniform(0, 1)))
        res = bp.bp_fixed_point(g, p)
        sol = exact.enumerate_ising(g, p)
        worst_m = max(worst_m, float(np.max(np.abs(bp.vertex_magnetizations(g, p, res.messages) - sol.magnetizations))))
        i = int(gen.integers(g.n))
        for r in range(g.diameter() + 1):
            nu = bp.local_marginal(g, p, res.messages, i, r)
            worst_tv = max(worst_tv, exact.tv_distance(nu, exact.marginal_on_subset(g, p, nu.vertices)))
            checked += 1
    ok = worst_m <= 1e-10 and worst_tv <= 1e-10 and clock.ok()
    assert report(1, "tree exactness", ok,
                  f"max |dm| {worst_m:.1e}, max TV {worst_tv:.1e} over {checked} balls (<= 1e-10); {clock}")


def test_c02_bp_convergence():
    clock = Clock(60)
    g = gen_random_regular(1000, 3, 0)
    p = IsingParams(1.0, 0.2)
    free = bp.bp_fixed_point(g, p, "free", tol=1e-12)
    plus = bp.bp_fixed_point(g, p, "plus", tol=1e-12)
    fits = [exp_decay_fit(*residual_tail(r.residuals)) for r in (free, plus)]
    gap = float(np.max(np.abs(np.tanh(free.messages.h) - np.tanh(plus.messages.h))))
    ok = (free.residual <= 1e-8 and plus.residual <= 1e-8 and all(f.rate > 0 and f.r2 >= 0.98 for f in fits)
          and gap <= 1e-8 and clock.ok())
    detail = (f"residuals {free.residual:.1e}/{plus.residual:.1e} after {free.sweeps}/{plus.sweeps} sweeps, "
              f"rates {fits[0].rate:.3f}/{fits[1].rate:.3f} (R2 {fits[0].r2:.4f}/{fits[1].r2:.4f}), "
              f"free vs plus {gap:.1e}; {clock}")
    assert report(2, "BP convergence", ok, detail)


def _cycle_tv(n: int, p: IsingParams, center: int = 0) -> float:
    g = cycle_graph(n)
    res = bp.bp_fixed_point(g, p, tol=1e-14)
    nu = bp.local_marginal(g, p, res.messages, center, 2)
    return exact.tv_distance(nu, exact.marginal_on_subset(g, p, nu.vertices))


def test_c03_local_marginals_on_cycles():
    clock = Clock(120)
    p = IsingParams(0.8, 0.3)
    tv = {n: _cycle_tv(n, p, center=5 % n) for n in (18, 20, 22)}
    ok = tv[18] <= 1e-3 and tv[20] < tv[18] and tv[22] < tv[20] and clock.ok()
    detail = ", ".join(f"TV(n={n}) {v:.2e}" for n, v in tv.items())
    assert report(3, "BP local marginals", ok, f"{detail} (<= 1e-3, decreasing); {clock}")


def test_c04_free_entropy_agreement():
    clock = Clock(20 * 60)
    # (a) chains against the transfer matrix
    worst_a = max(
        abs(cavity.bethe_phi_regular(2, IsingParams(b, B)) - exact.chain_free_entropy(b, B))
        for b in np.round(np.arange(0.2, 1.45, 0.1), 10) for B in (0.1, 0.5)
    )
    grid = np.linspace(0.0, 0.5, 11)
    cfg = MCConfig(measure=3000, seed=0)
    # (b) 3-regular
    p = IsingParams(0.5, 0.2)
    bethe_b = cavity.bethe_phi_regular(3, p)
    ti_b = thermo_integrate(gen_random_regular(10_000, 3, 0), 0.2, grid, cfg)
    diff_b = abs(bethe_b - ti_b.phi[-1])
    # (c) Poisson(3) against Erdos-Renyi with 1.5 n edges
    de = cavity.population_fixed_point(POI3, p, N=100_000, seed=0)
    bethe_c, se_c = cavity.bethe_phi(POI3, de.population, p, mc_samples=400_000, seed=0)
    ti_c = thermo_integrate(gen_erdos_renyi(10_000, 1.5, 0), 0.2, grid, cfg)
    diff_c = abs(bethe_c - ti_c.phi[-1])
    ok = worst_a <= 1e-6 and diff_b <= 5e-3 and diff_c <= 1e-2 and de.converged and clock.ok()
    detail = (f"(a) chain max err {worst_a:.1e} (<= 1e-6); "
              f"(b) 3-regular {bethe_b:.5f} vs TI {ti_b.phi[-1]:.5f}+-{ti_b.phi_stderr[-1]:.1e}, diff {diff_b:.1e} (<= 5e-3); "
              f"(c) Poisson(3) {bethe_c:.5f}+-{se_c:.1e} vs TI {ti_c.phi[-1]:.5f}+-{ti_c.phi_stderr[-1]:.1e}, "
              f"diff {diff_c:.1e} (<= 1e-2); {clock}")
    assert report(4, "free entropy agreement", ok, detail)


def test_c05_density_evolution():
    clock = Clock(5 * 60)
    N = 100_000
    # regular collapse
    p = IsingParams(1.0, 0.1)
    reg = cavity.population_fixed_point(REG3, p, N=N, seed=0, tol=1e-14, max_steps=5000)
    h = cavity.regular_fixed_point(3, p)
    collapse = float(np.mean(np.abs(reg.population.samples - h)))
    # quantiles nondecreasing in t under common random numbers
    q = IsingParams(0.6, 0.2)
    pop = cavity.population_init(N)
    worst_q = -math.inf
    for _ in range(30):
        new = cavity.population_step(pop, POI3, q, seed=2, crn=True)
        worst_q = max(worst_q, float(np.max(np.sort(pop.samples) - np.sort(new.samples))))
        pop = new
    # uniqueness from two starts
    lo = cavity.population_fixed_point(POI3, q, N=N, seed=3, init=0.0)
    hi = cavity.population_fixed_point(POI3, q, N=N, seed=3, init=50.0)
    w1 = cavity.w1_distance(lo.population, hi.population)
    ok = (collapse <= 1e-6 and worst_q <= 1e-12 and w1 <= 5 / math.sqrt(N)
          and lo.converged and hi.converged and clock.ok())
    detail = (f"regular W1 to scalar root {collapse:.1e} (<= 1e-6); largest quantile decrease {worst_q:.1e}; "
              f"W1(zero start, start 50) {w1:.2e} (<= {5 / math.sqrt(N):.2e}); {clock}")
    assert report(5, "density evolution", ok, detail)


def test_c06_critical_point():
    clock = Clock(5 * 60)
    err = abs(critical_beta(2.0).beta_c - math.atanh(0.5))
    bc = critical_beta(POI3.rho_bar).beta_c
    mags = {}
    for label, beta in (("below", bc - 0.2), ("above", bc + 0.3)):
        res = cavity.population_fixed_point(POI3, IsingParams(beta, 1e-3), N=100_000, seed=0, max_steps=1000)
        mags[label] = (res.population.magnetization(), res.converged)
    ok = (err <= 1e-12 and mags["below"][0] <= 0.05 and mags["above"][0] >= 0.2
          and all(c for _, c in mags.values()) and clock.ok())
    detail = (f"beta_c(2) error {err:.1e}; E tanh h* {mags['below'][0]:.4f} at beta_c-0.2 (<= 0.05), "
              f"{mags['above'][0]:.4f} at beta_c+0.3 (>= 0.2); {clock}")
    assert report(6, "critical point", ok, detail)


def test_c07_inequalities():
    clock = Clock(10 * 60)
    worst_g = -math.inf
    worst_ghs = -math.inf
    graphs = 0
    for n in range(1, 9):
        g = griffiths_report(n)
        worst_g = max(worst_g, g["beta"], g["field"], g["edge"])
        worst_ghs = max(worst_ghs, ghs_report(n)["ghs"])
        graphs += g["graphs"]
    gen = rng(7, "acceptance_simon")
    worst_s = -math.inf
    for g in random_trees(500, n_min=2, n_max=14, seed=107):
        tree = trees.RootedTree.from_graph(g, field=gen.uniform(0, 1, g.n))
        worst_s = max(worst_s, trees.simon_violation(tree, IsingParams(float(gen.uniform(0, 2)))))
    ok = worst_g <= 1e-10 and worst_ghs <= 1e-10 and worst_s <= 1e-10 and clock.ok()
    detail = (f"{graphs} connected graphs: Griffiths worst decrease {worst_g:.1e}, GHS worst mixed difference "
              f"{worst_ghs:.1e}; two-point tree inequality worst {worst_s:.1e} on 500 trees (all <= 1e-10); {clock}")
    assert report(7, "correlation inequalities", ok, detail)


def test_c08_tree_boundary_decay():
    clock = Clock(5 * 60)
    p = IsingParams(0.8, 0.3)
    depths = np.arange(1, 13)
    gaps = np.array([trees.boundary_gaps(trees.sample_tree(POI3, 12, 8, s), p, depths) for s in range(1000)])
    mean = gaps.mean(axis=0)
    fit = exp_decay_fit(depths, mean)
    worst_rise = float(np.max(np.diff(mean)))
    ok = worst_rise <= 0 and fit.rate > 0 and clock.ok()
    detail = (f"mean gap {mean[0]:.2e} at depth 1 to {mean[-1]:.2e} at depth 12, largest step {worst_rise:.1e} "
              f"(<= 0); fitted rate {fit.rate:.3f} (> 0); {clock}")
    assert report(8, "tree boundary decay", ok, detail)


def _coupled_population(beta: float, N: int, steps: int) -> np.ndarray:
    """Fixed number of generations with one seed, so nearby betas share all randomness."""
    res = cavity.population_fixed_point(POI3, IsingParams(beta, 0.2), N=N, seed=1, tol=0.0, max_steps=steps)
    return np.tanh(res.population.samples)


def test_c09_lipschitz_and_stability():
    clock = Clock(5 * 60)
    steps = (0.1, 0.05, 0.025)
    spread = 0.0
    largest = 0.0
    for beta in np.round(np.arange(0.1, 2.0, 0.2), 10):
        base = _coupled_population(beta, 20_000, 60)
        r = [cavity.w1_distance(base, _coupled_population(beta + d, 20_000, 60)) / d for d in steps]
        spread = max(spread, max(r) / min(r))
        largest = max(largest, max(r))
    # Poisson: independent signs, averaged with the mirrored signs so odd orders cancel exactly
    p = IsingParams(0.6, 0.2)
    de = cavity.population_fixed_point(POI3, p, N=100_000, seed=0)
    s = de.population.samples
    signs = np.where(rng(0, "acceptance_signs").random(s.size) < 0.5, 1.0, -1.0)
    phi0, _ = cavity.bethe_phi(POI3, de.population, p, 100_000, seed=3)
    eps = np.array([0.02, 0.04, 0.08, 0.16])
    dphi = []
    for e in eps:
        a, _ = cavity.bethe_phi(POI3, cavity.Population(s + e * signs), p, 100_000, seed=3)
        b, _ = cavity.bethe_phi(POI3, cavity.Population(s - e * signs), p, 100_000, seed=3)
        dphi.append(0.5 * (a + b) - phi0)
    slope_poi = loglog_fit(eps, dphi).slope
    # 3-regular: exact expectation over signs, and a one-sided shift at the fixed point
    q = IsingParams(0.6, 0.2)
    h = cavity.regular_fixed_point(3, q)
    base = cavity.phi_point_mass(3, q, h)
    slope_two = loglog_fit(eps, [cavity.phi_two_point(3, q, h, e) - base for e in eps]).slope
    slope_shift = loglog_fit(eps, [cavity.phi_point_mass(3, q, h + e) - base for e in eps]).slope
    ok = spread <= 2 and slope_poi >= 1.8 and slope_two >= 1.8 and slope_shift >= 1.8 and clock.ok()
    detail = (f"W1/dbeta max {largest:.3f}, spread over dbeta {spread:.3f} (<= 2); "
              f"phi stability slopes: Poisson {slope_poi:.2f}, regular +-eps {slope_two:.2f}, "
              f"regular shift {slope_shift:.2f} (>= 1.8); {clock}")
    assert report(9, "beta-Lipschitz and phi stability", ok, detail)


def test_c10_derivative_identity():
    clock = Clock(60)
    eps = 1e-3
    worst = 0.0
    for k in (2, 3, 4):
        for beta in np.round(np.arange(0.1, 1.55, 0.1), 10):
            for B in (0.1, 0.5):
                f = lambda b: cavity.bethe_phi_regular(k, IsingParams(b, B))
                fd = (f(beta + eps) - f(beta - eps)) / (2 * eps)
                worst = max(worst, abs(fd - cavity.energy_density_regular(k, IsingParams(beta, B))))
    ok = worst <= 1e-4 and clock.ok()
    assert report(10, "derivative identity", ok, f"max |finite difference - energy| {worst:.1e} (<= 1e-4); {clock}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
