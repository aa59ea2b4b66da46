import json
import math
import subprocess
import sys

import pytest

from tree_ising.cli import PhiConfig, compare_phi, extrapolate_b0, run
from tree_ising.core import rng
from tree_ising.exact import chain_free_entropy
from tree_ising.graphs import Graph, random_labeled_tree
from tree_ising.io import read_csv, write_graph


@pytest.fixture
def edge_file(tmp_path):
    path = tmp_path / "edge.txt"
    write_graph(Graph.from_edges(2, [(0, 1)]), path)
    return str(path)


@pytest.fixture
def tree_file(tmp_path):
    g = random_labeled_tree(14, rng(0, "cli_tree"))
    path = tmp_path / "tree14.txt"
    write_graph(g, path)
    return str(path), g


def test_crit(capsys):
    assert run(["crit", "--degree", "poisson:3"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(math.atanh(1 / 3), abs=1e-15)
    assert run(["crit", "--rho-bar", "0.5"]) == 0
    assert capsys.readouterr().out.startswith("inf")


def test_phi_exact_edge(edge_file, capsys):
    assert run(["phi", "--mode", "exact", "--graph", edge_file, "--beta", "0.5", "--B", "0.2"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.7819937940019168, abs=1e-15)


def test_bp_tree_exact(tree_file, tmp_path, capsys):
    path, g = tree_file
    out = tmp_path / "bp.csv"
    tol = "1e-300"
    assert run(["bp", "--graph", path, "--beta", "0.9", "--B", "0.4", "--tol", tol, "--out", str(out)]) == 0
    meta, rows = read_csv(out.read_text())
    assert meta["residual"] == 0.0 and meta["sweeps"] <= g.diameter() + 1
    assert meta["version"] and "config" in meta and "wall_time_s" in meta
    assert len(rows) == 14


def test_bp_nonconvergence_exit_1(tree_file, capsys):
    path, _ = tree_file
    assert run(["bp", "--graph", path, "--beta", "0.9", "--B", "0.4", "--max-sweeps", "1"]) == 1
    assert "did not converge" in capsys.readouterr().err


def test_exit_codes(edge_file, tmp_path, capsys):
    assert run([]) == 2
    assert run(["bogus"]) == 2
    assert run(["phi", "--mode", "exact", "--graph", edge_file, "--beta", "-1"]) == 2
    assert run(["phi", "--mode", "bethe", "--degree", "regular:3", "--beta", "0.5", "--B", "0"]) == 2
    assert run(["bp", "--graph", str(tmp_path / "missing.txt"), "--beta", "0.5"]) == 1
    big = tmp_path / "big.txt"
    write_graph(Graph.from_edges(30, [(i, i + 1) for i in range(29)]), big)
    assert run(["phi", "--mode", "exact", "--graph", str(big), "--beta", "0.5", "--B", "0.1"]) == 1
    capsys.readouterr()


def test_phi_table_reproducible(tmp_path):
    args = ["phi", "--mode", "bethe,ti", "--ensemble", "regular", "--n", "60", "--k", "3",
            "--beta", "0,0.1,0.2", "--B", "0.2", "--ti-measure", "200", "--seed", "5"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(args + ["--out", str(a)]) == 0
    assert run(args + ["--out", str(b)]) == 0
    ta, tb = a.read_text().splitlines(), b.read_text().splitlines()
    assert ta[1:] == tb[1:]
    meta = json.loads(ta[0][1:])
    assert meta["seed"] == 5 and meta["config"]["modes"] == ["bethe", "ti"]
    _, rows = read_csv(a.read_text())
    r0 = rows[0]
    assert float(r0["bethe"]) == pytest.approx(math.log(2 * math.cosh(0.2)))
    assert float(r0["ti"]) == pytest.approx(math.log(2 * math.cosh(0.2)), abs=1e-15)


def test_de_and_tree_commands(tmp_path, capsys):
    out = tmp_path / "de.csv"
    assert run(["de", "--degree", "poisson:3", "--beta", "0.6", "--B", "0.2", "--N", "2000", "--out", str(out)]) == 0
    meta, rows = read_csv(out.read_text())
    assert rows[0]["t"] == "0" and meta["command"] == "de"
    assert run(["tree", "--experiment", "simon", "--degree", "poisson:2", "--beta", "0.7", "--B", "0.3",
                "--depth", "3", "--trees", "20"]) == 0
    assert run(["tree", "--experiment", "gap", "--degree", "poisson:2", "--beta", "0.7", "--B", "0.3",
                "--depth", "4", "--trees", "10"]) == 0
    assert "decay_rate" in capsys.readouterr().out


def test_gen(tmp_path, capsys):
    out = tmp_path / "g.txt"
    assert run(["gen", "--ensemble", "regular", "--n", "100", "--k", "3", "--out", str(out)]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["m"] == 150 and 0 <= stats["local_tree_fraction"] <= 1
    assert run(["gen", "--ensemble", "regular", "--n", "100"]) == 2


def test_verify(capsys):
    assert run(["verify", "--check", "xi", "--check", "transfer_matrix"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == [line for line in out if line.startswith("PASS")] and len(out) == 2


def test_compare_phi_chain_rows():
    cfg = PhiConfig(modes=("bethe",), betas=(0.2, 0.8, 1.4), B=0.5, degree="regular:2")
    for r in compare_phi(cfg):
        assert abs(r["bethe"] - chain_free_entropy(r["beta"], 0.5)) <= 1e-6


def test_extrapolate_b0_linear_kink():
    assert extrapolate_b0(lambda B: 3.0 + 2.0 * B, 0.2) == pytest.approx(3.0)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "tree_ising", "crit", "--rho-bar", "2"], capture_output=True, text=True)
    assert res.returncode == 0 and float(res.stdout) == pytest.approx(math.atanh(0.5), abs=1e-15)


def test_ti_grid_snaps_requested_betas():
    from tree_ising.cli import _ti_grid

    grid = _ti_grid((0.1, 0.2, 0.3, 0.6), 0.05)
    assert grid.size == 13 and abs(grid[-1] - 0.6) <= 1e-12
    assert _ti_grid((0.33,), 0.1).tolist()[-2:] == [0.30000000000000004, 0.33]


def test_ti_rows_are_finite(capsys):
    rows = compare_phi(PhiConfig(modes=("bethe", "ti"), betas=(0.1, 0.2, 0.3), B=0.2, degree="regular:3",
                                 ensemble="regular", n=200, ti_measure=200, extras={"k": 3}))
    assert all(abs(r["ti"] - r["bethe"]) <= 0.05 for r in rows)
