"""Regenerate the packaged catalog of connected 8-vertex graphs."""

import argparse
import time
from pathlib import Path

import networkx as nx

from tree_ising.catalog import COUNTS, DATA_FILE, generate_connected_8

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "tree_ising" / "data" / DATA_FILE


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args()
    t0 = time.time()
    graphs = generate_connected_8()
    if len(graphs) != COUNTS[8]:
        raise SystemExit(f"expected {COUNTS[8]} graphs, got {len(graphs)}")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "wb") as fh:
        for h in graphs:
            fh.write(nx.to_graph6_bytes(h, header=False))
    print(f"wrote {len(graphs)} graphs to {args.out} in {time.time() - t0:.1f}s")


if __name__ == "__main__":
    main()
