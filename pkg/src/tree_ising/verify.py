"""Fast invariant checks, run by ``tree-ising verify``.

Each check returns ``(ok, detail)``. These are smoke-level versions of the
test suite: small instances, a few seconds in total.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from tree_ising import bp, cavity, exact, trees
from tree_ising.catalog import connected_graphs
from tree_ising.core import IsingParams, rng, xi
from tree_ising.graphs import DegreeDistribution, cycle_graph, random_labeled_tree


def check_xi() -> tuple[bool, str]:
    h = np.linspace(-30, 30, 601)
    worst = 0.0
    ok = True
    for beta in (0.0, 0.3, 1.0, 4.0):
        x = xi(beta, h)
        ok &= bool(np.all(x == -xi(beta, -h)))
        ok &= bool(np.all(np.abs(x) <= np.minimum(beta, np.abs(h))))
        small = np.abs(h) < 5
        worst = max(worst, float(np.max(np.abs(x[small] - np.arctanh(math.tanh(beta) * np.tanh(h[small]))))))
    ok &= xi(1.0, math.inf) == 1.0 and worst <= 1e-12
    return ok, f"closed-form mismatch {worst:.1e}"


def check_tree_bp(seed: int = 0, count: int = 20) -> tuple[bool, str]:
    gen = rng(seed, "verify_tree_bp")
    worst = 0.0
    for _ in range(count):
        n = int(gen.integers(2, 13))
        g = random_labeled_tree(n, gen)
        params = IsingParams(float(gen.uniform(0, 2)), float(gen.uniform(0.05, 1)))
        sol = exact.enumerate_ising(g, params)
        res = bp.bp_fixed_point(g, params)
        m = bp.vertex_magnetizations(g, params, res.messages)
        worst = max(worst, float(np.max(np.abs(m - sol.magnetizations))))
        phi = bp.bethe_free_entropy(g, params, res.messages)
        worst = max(worst, abs(phi - sol.log_partition / n))
        tree = trees.RootedTree.from_graph(g)
        worst = max(worst, abs(trees.tree_log_partition(tree, params) - sol.log_partition))
    return worst <= 1e-10, f"max error {worst:.1e}"


def check_transfer_matrix() -> tuple[bool, str]:
    worst = 0.0
    for beta in (0.2, 0.8, 1.4):
        for B in (0.1, 0.5):
            worst = max(worst, abs(cavity.bethe_phi_regular(2, IsingParams(beta, B)) - exact.chain_free_entropy(beta, B)))
    g = cycle_graph(12)
    p = IsingParams(0.8, 0.3)
    worst = max(worst, abs(exact.enumerate_ising(g, p).log_partition - exact.cycle_log_partition(12, 0.8, 0.3)))
    return worst <= 1e-10, f"max error {worst:.1e}"


def check_griffiths(n_max: int = 5) -> tuple[bool, str]:
    worst = -math.inf
    for n in range(2, n_max + 1):
        masks = exact.edge_masks(n, connected_graphs(n))
        prev = None
        for beta in (0.0, 0.3, 0.8):
            m, c = exact.batch_moments(n, masks, beta, np.full(n, 0.3))
            cur = np.concatenate([m, c], axis=1)
            if prev is not None:
                worst = max(worst, float(np.max(prev - cur)))
            prev = cur
    return worst <= 1e-12, f"largest decrease {worst:.1e}"


def check_density_evolution() -> tuple[bool, str]:
    params = IsingParams(1.0, 0.1)
    res = cavity.population_fixed_point(DegreeDistribution.regular(3), params, N=1000, seed=0, tol=1e-13, max_steps=5000)
    h = cavity.regular_fixed_point(3, params)
    err = float(np.max(np.abs(res.population.samples - h)))
    return res.converged and err <= 1e-10, f"distance to scalar root {err:.1e}"


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "xi": check_xi,
    "tree_bp_exact": check_tree_bp,
    "transfer_matrix": check_transfer_matrix,
    "griffiths_small": check_griffiths,
    "density_evolution_regular": check_density_evolution,
}


def run_all(names=None) -> dict[str, tuple[bool, str]]:
    return {name: CHECKS[name]() for name in (names or CHECKS)}
