"""Command line entry point: ``tree-ising <command> [options]``.

Every table goes out as CSV whose first line is ``# {json}`` metadata with the
package version, the full configuration, the seed and the wall time. The CSV
body depends only on the configuration, so reruns reproduce it byte for byte.

Exit codes: 0 success, 1 runtime failure (capacity, non-convergence, failed
check), 2 bad arguments.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from tree_ising import __version__, bp, cavity, exact, graphs, montecarlo, trees, verify
from tree_ising.core import CapacityError, IsingError, IsingParams, ParameterError, critical_beta
from tree_ising.fitting import exp_decay_fit
from tree_ising.io import format_csv, format_graph, load_degree, read_graph, write_population

PHI_MODES = ("bethe", "exact", "ti")


class RuntimeFailure(IsingError):
    """Raised for conditions that map to exit status 1."""


@dataclass
class PhiConfig:
    modes: tuple[str, ...]
    betas: tuple[float, ...]
    B: float
    graph: str | None = None
    degree: str | None = None
    ensemble: str | None = None
    n: int | None = None
    seed: int = 0
    population: int = cavity.DEFAULT_POPULATION
    mc_samples: int = cavity.DEFAULT_MC_SAMPLES
    ti_step: float = 0.05
    ti_measure: int = 2000
    ti_burn_in: int | None = None
    extras: dict = field(default_factory=dict)


def _diag(msg: str):
    print(msg, file=sys.stderr)


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _meta(command: str, config: dict, seed, t0: float) -> dict:
    return {
        "version": __version__,
        "command": command,
        "config": config,
        "seed": seed,
        "wall_time_s": round(time.time() - t0, 3),
    }


def _parse_init(s: str):
    if s in ("free", "plus"):
        return s
    try:
        return float(s)
    except ValueError:
        raise ParameterError(f"init must be free, plus or a number, got {s!r}") from None


def _floats(s: str) -> tuple[float, ...]:
    """``0.1,0.2`` or ``start:stop:step`` (inclusive stop)."""
    if ":" in s:
        a, b, c = (float(x) for x in s.split(":"))
        k = int(round((b - a) / c))
        return tuple(float(a + i * c) for i in range(k + 1))
    return tuple(float(x) for x in s.split(","))


def build_graph(ensemble: str, n: int, seed: int, k: int | None = None, gamma: float | None = None, degree: str | None = None):
    if ensemble == "regular":
        if k is None:
            raise ParameterError("--k is required for the regular ensemble")
        return graphs.gen_random_regular(n, k, seed)
    if ensemble == "er":
        if gamma is None:
            raise ParameterError("--gamma is required for the Erdos-Renyi ensemble")
        return graphs.gen_erdos_renyi(n, gamma, seed)
    if ensemble == "config":
        if degree is None:
            raise ParameterError("--degree is required for the configuration ensemble")
        return graphs.gen_configuration(n, load_degree(degree), seed)
    raise ParameterError(f"unknown ensemble {ensemble!r}")


# -- free-entropy comparison --------------------------------------------------


def _ti_grid(betas, step: float) -> np.ndarray:
    top = max(betas)
    k = max(1, math.ceil(top / step - 1e-12))
    grid = np.linspace(0.0, k * step, k + 1)
    extra = [b for b in betas if np.min(np.abs(grid - b)) > 1e-9]
    grid = np.sort(np.concatenate([grid, extra]))
    return grid[grid <= top + 1e-9]


def _config_graph(cfg: PhiConfig):
    if cfg.graph:
        return read_graph(cfg.graph)
    if cfg.ensemble:
        extras = cfg.extras
        return build_graph(cfg.ensemble, cfg.n, cfg.seed, extras.get("k"), extras.get("gamma"), cfg.degree)
    return None


def _bethe(P: graphs.DegreeDistribution, params: IsingParams, cfg: PhiConfig) -> tuple[float, float]:
    if params.beta == 0:
        return float(math.log(2 * math.cosh(params.field))), 0.0
    if not P.is_poisson and len(P.table) == 1:
        return cavity.bethe_phi_regular(next(iter(P.table)), params), 0.0
    res = cavity.population_fixed_point(P, params, N=cfg.population, seed=cfg.seed)
    if not res.converged:
        _diag(f"density evolution did not converge at beta={params.beta} (last W1 {res.w1:.2e})")
    return cavity.bethe_phi(P, res.population, params, cfg.mc_samples, cfg.seed)


def compare_phi(cfg: PhiConfig) -> list[dict]:
    """One row per beta with the requested free-entropy estimates and errors."""
    modes = tuple(cfg.modes)
    if any(m not in PHI_MODES for m in modes):
        raise ParameterError(f"modes must be among {PHI_MODES}")
    if cfg.B <= 0 and "bethe" in modes:
        raise ParameterError("the Bethe formula is evaluated for B > 0 only; see --extrapolate-b0")
    g = _config_graph(cfg)
    if ("exact" in modes or "ti" in modes) and g is None:
        raise ParameterError("exact and ti modes need --graph or --ensemble")
    P = None
    if "bethe" in modes:
        if cfg.degree:
            P = load_degree(cfg.degree)
        elif g is not None:
            ks, counts = np.unique(g.degrees, return_counts=True)
            P = graphs.DegreeDistribution(table=dict(zip(ks.tolist(), (counts / counts.sum()).tolist())))
        else:
            raise ParameterError("bethe mode needs --degree or a graph")
    rows = [{"beta": b, "B": cfg.B} for b in cfg.betas]
    if "bethe" in modes:
        for r in rows:
            r["bethe"], r["bethe_stderr"] = _bethe(P, IsingParams(r["beta"], cfg.B), cfg)
    if "exact" in modes:
        for r in rows:
            r["exact"] = exact.exact_phi_n(g, IsingParams(r["beta"], cfg.B))
    if "ti" in modes:
        grid = _ti_grid(cfg.betas, cfg.ti_step)
        mc = montecarlo.MCConfig(burn_in=cfg.ti_burn_in, measure=cfg.ti_measure, seed=cfg.seed)
        res = montecarlo.thermo_integrate(g, cfg.B, grid, mc)
        for r in rows:
            j = int(np.argmin(np.abs(grid - r["beta"])))
            r["ti"], r["ti_stderr"] = float(res.phi[j]), float(res.phi_stderr[j])
    return rows


def extrapolate_b0(fn, B: float) -> float:
    """``phi(beta, 0)`` as the limit ``B -> 0``: ``2 phi(B/2) - phi(B)``.

    Exact for a kink linear in ``|B|`` (ordered phase), error ``O(B^2)`` otherwise.
    """
    return 2 * fn(B / 2) - fn(B)


def _phi_columns(modes) -> list[str]:
    cols = ["beta", "B"]
    for m in PHI_MODES:
        if m in modes:
            cols += [m] if m == "exact" else [m, f"{m}_stderr"]
    return cols


# -- subcommands ---------------------------------------------------------------


def cmd_gen(a, t0):
    g = build_graph(a.ensemble, a.n, a.seed, a.k, a.gamma, a.degree)
    text = format_graph(g)
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(text)
    stats = {
        "n": g.n,
        "m": g.m,
        "mean_degree": 2 * g.m / g.n,
        "max_degree": int(g.degrees.max(initial=0)),
        "local_tree_fraction": graphs.local_tree_fraction(g, a.radius, a.samples, a.seed) if g.n else 1.0,
    }
    if a.out:
        print(json.dumps(stats))
    else:
        sys.stdout.write(text)
        _diag(json.dumps(stats))
    return 0


def cmd_bp(a, t0):
    g = read_graph(a.graph)
    params = IsingParams(a.beta, a.B)
    res = bp.bp_fixed_point(g, params, _parse_init(a.init), a.tol, a.max_sweeps, a.damping)
    _diag(f"sweeps={res.sweeps} residual={res.residual:.3e} converged={res.converged}")
    mags = bp.vertex_magnetizations(g, params, res.messages)
    config = {k: v for k, v in vars(a).items() if k != "func"}
    meta = _meta("bp", config, None, t0)
    meta.update(sweeps=res.sweeps, residual=res.residual, converged=res.converged)
    rows = [{"i": i, "magnetization": float(m)} for i, m in enumerate(mags)]
    _emit(format_csv(rows, ["i", "magnetization"], meta), a.out)
    if a.messages:
        h = res.messages.h
        mrows = [{"i": int(g.src[d]), "j": int(g.dst[d]), "h_ij": float(h[d])} for d in range(2 * g.m)]
        with open(a.messages, "w") as fh:
            fh.write(format_csv(mrows, ["i", "j", "h_ij"], meta))
    if a.phi:
        print(f"bethe_phi {bp.bethe_free_entropy(g, params, res.messages)!r}")
    if not res.converged:
        raise RuntimeFailure(f"BP did not converge in {res.sweeps} sweeps (residual {res.residual:.3e})")
    return 0


def cmd_de(a, t0):
    P = load_degree(a.degree)
    params = IsingParams(a.beta, a.B)
    rows = [cavity.population_summary(cavity.population_init(a.N, a.init))]

    def record(pop, d):
        rows.append(cavity.population_summary(pop, d))

    res = cavity.population_fixed_point(
        P, params, a.N, a.seed, a.tol, a.max_steps, init=a.init, crn=a.crn, callback=record
    )
    _diag(f"steps={res.steps} w1={res.w1:.3e} converged={res.converged} magnetization={res.population.magnetization():.6f}")
    config = {k: v for k, v in vars(a).items() if k != "func"}
    meta = _meta("de", config, a.seed, t0)
    cols = ["t", "mean", "std", "q01", "q25", "q50", "q75", "q99", "w1_prev"]
    _emit(format_csv(rows, cols, meta), a.out)
    if a.dump:
        write_population(res.population.samples, a.dump)
    if not res.converged:
        raise RuntimeFailure("density evolution did not converge")
    return 0


def cmd_phi(a, t0):
    modes = tuple(m.strip() for m in a.mode.split(","))
    cfg = PhiConfig(
        modes=modes, betas=_floats(a.beta), B=a.B, graph=a.graph, degree=a.degree, ensemble=a.ensemble,
        n=a.n, seed=a.seed, population=a.N, mc_samples=a.mc_samples, ti_step=a.ti_step,
        ti_measure=a.ti_measure, ti_burn_in=a.ti_burn_in, extras={"k": a.k, "gamma": a.gamma},
    )
    if a.extrapolate_b0:
        if modes != ("bethe",):
            raise ParameterError("--extrapolate-b0 applies to --mode bethe alone")
        rows = []
        for beta in cfg.betas:
            fn = lambda B, beta=beta: compare_phi(PhiConfig(**{**asdict(cfg), "betas": (beta,), "B": B}))[0]["bethe"]
            rows.append({"beta": beta, "B": 0.0, "bethe": extrapolate_b0(fn, cfg.B), "bethe_stderr": math.nan})
    else:
        rows = compare_phi(cfg)
    if len(rows) == 1 and len(modes) == 1 and not a.out:
        m = modes[0]
        print(repr(rows[0][m]))
        return 0
    _emit(format_csv(rows, _phi_columns(modes), _meta("phi", asdict(cfg), cfg.seed, t0)), a.out)
    return 0


def cmd_tree(a, t0):
    P = load_degree(a.degree)
    params = IsingParams(a.beta, a.B)
    config = {k: v for k, v in vars(a).items() if k != "func"}
    depths = list(range(1, a.depth + 1))
    if a.experiment == "gap":
        gaps = np.array([trees.boundary_gaps(trees.sample_tree(P, a.depth, a.seed, s), params, depths) for s in range(a.trees)])
        mean = gaps.mean(axis=0)
        se = gaps.std(axis=0, ddof=1) / math.sqrt(a.trees) if a.trees > 1 else np.zeros_like(mean)
        fit = exp_decay_fit(depths, mean)
        rows = [{"depth": d, "gap": m, "stderr": s} for d, m, s in zip(depths, mean, se)]
        meta = _meta("tree", config, a.seed, t0)
        meta.update(decay_rate=fit.rate, r2=fit.r2)
        _emit(format_csv(rows, ["depth", "gap", "stderr"], meta), a.out)
    elif a.experiment == "decay":
        radii = list(range(0, a.depth + 1))
        sums = np.array([
            trees.generation_correlation_sums(trees.sample_tree(P, a.depth, a.seed, s), params, radii) for s in range(a.trees)
        ])
        mean = sums.mean(axis=0)
        fit = exp_decay_fit(radii, mean)
        rows = [{"radius": r, "correlation_sum": m} for r, m in zip(radii, mean)]
        meta = _meta("tree", config, a.seed, t0)
        meta.update(decay_rate=fit.rate, r2=fit.r2)
        _emit(format_csv(rows, ["radius", "correlation_sum"], meta), a.out)
    else:
        rows = []
        for s in range(a.trees):
            tree = trees.sample_tree(P, a.depth, a.seed, s)
            if tree.n > a.max_nodes:
                continue
            rows.append({"tree": s, "nodes": tree.n, "violation": trees.simon_violation(tree, params)})
        worst = max((r["violation"] for r in rows), default=-math.inf)
        meta = _meta("tree", config, a.seed, t0)
        meta.update(max_violation=worst, trees_checked=len(rows))
        _emit(format_csv(rows, ["tree", "nodes", "violation"], meta), a.out)
        if worst > 1e-10:
            raise RuntimeFailure(f"two-point inequality violated by {worst:.3e}")
    return 0


def cmd_crit(a, t0):
    if a.rho_bar is not None:
        rho_bar = a.rho_bar
    elif a.degree:
        rho_bar = load_degree(a.degree).rho_bar
    else:
        raise ParameterError("give --degree or --rho-bar")
    cp = critical_beta(rho_bar)
    if cp.transition:
        print(repr(cp.beta_c))
    else:
        print("inf (no phase transition: rho_bar <= 1)")
    return 0


def cmd_verify(a, t0):
    names = a.check or None
    results = verify.run_all(names)
    failed = 0
    for name, (ok, detail) in results.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed += not ok
    if failed:
        raise RuntimeFailure(f"{failed} check(s) failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tree-ising", description="Ising models on locally tree-like graphs")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common_model(p, beta_type=float):
        p.add_argument("--beta", type=beta_type, required=True)
        p.add_argument("--B", type=float, default=0.0, help="uniform magnetic field")

    p = sub.add_parser("gen", help="generate a random graph")
    p.add_argument("--ensemble", choices=["regular", "er", "config"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--gamma", type=float, help="edges per vertex (Erdos-Renyi)")
    p.add_argument("--degree", help="degree spec or file (configuration model)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radius", type=int, default=2, help="ball radius for the tree-fraction diagnostic")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bp", help="belief propagation fixed point and marginals")
    p.add_argument("--graph", required=True)
    common_model(p)
    p.add_argument("--init", default="free", help="free, plus or a constant >= 0")
    p.add_argument("--tol", type=float, default=bp.TOL)
    p.add_argument("--max-sweeps", type=int, default=bp.MAX_SWEEPS)
    p.add_argument("--damping", type=float, default=0.0)
    p.add_argument("--messages", help="also write messages CSV i,j,h_ij")
    p.add_argument("--phi", action="store_true", help="print the Bethe free entropy")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bp)

    p = sub.add_parser("de", help="density evolution trajectory")
    p.add_argument("--degree", required=True)
    common_model(p)
    p.add_argument("--N", type=int, default=cavity.DEFAULT_POPULATION)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-steps", type=int, default=500)
    p.add_argument("--init", type=float, default=0.0)
    p.add_argument("--crn", action="store_true", help="reuse one random stream every generation")
    p.add_argument("--dump", help="write the final population, one sample per line")
    p.add_argument("--out")
    p.set_defaults(func=cmd_de)

    p = sub.add_parser("phi", help="free entropy by Bethe formula, enumeration or thermodynamic integration")
    p.add_argument("--mode", default="bethe", help="comma-separated subset of bethe,exact,ti")
    p.add_argument("--beta", required=True, help="value, list a,b,c or range start:stop:step")
    p.add_argument("--B", type=float, default=0.0)
    p.add_argument("--graph")
    p.add_argument("--degree")
    p.add_argument("--ensemble", choices=["regular", "er", "config"])
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--N", type=int, default=cavity.DEFAULT_POPULATION)
    p.add_argument("--mc-samples", type=int, default=cavity.DEFAULT_MC_SAMPLES)
    p.add_argument("--ti-step", type=float, default=0.05)
    p.add_argument("--ti-measure", type=int, default=2000)
    p.add_argument("--ti-burn-in", type=int)
    p.add_argument("--extrapolate-b0", action="store_true", help="report the B -> 0 limit from B and B/2")
    p.add_argument("--out")
    p.set_defaults(func=cmd_phi)

    p = sub.add_parser("tree", help="Galton-Watson tree studies")
    p.add_argument("--experiment", choices=["gap", "decay", "simon"], required=True)
    p.add_argument("--degree", required=True)
    common_model(p)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--trees", type=int, default=200)
    p.add_argument("--max-nodes", type=int, default=14, help="size cap for the simon experiment")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_tree)

    p = sub.add_parser("crit", help="critical inverse temperature")
    p.add_argument("--degree")
    p.add_argument("--rho-bar", type=float)
    p.set_defaults(func=cmd_crit)

    p = sub.add_parser("verify", help="run quick invariant checks")
    p.add_argument("--check", action="append", choices=sorted(verify.CHECKS))
    p.set_defaults(func=cmd_verify)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    t0 = time.time()
    try:
        return a.func(a, t0)
    except ParameterError as exc:
        _diag(f"error: {exc}")
        return 2
    except (RuntimeFailure, CapacityError, IsingError) as exc:
        _diag(f"error: {exc}")
        return 1
    except OSError as exc:
        _diag(f"error: {exc}")
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
