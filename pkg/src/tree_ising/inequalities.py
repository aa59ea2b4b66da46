"""Correlation inequalities checked exhaustively over small connected graphs.

Each report returns the worst violation (largest wrong-signed change); a
value ``<= tol`` means the inequality holds on every graph, vertex and grid
point examined. Moments come from :func:`exact.batch_moments` in chunks.
"""

from __future__ import annotations

import itertools

import numpy as np

from tree_ising.catalog import connected_graphs
from tree_ising.exact import batch_moments, edge_masks

CHUNK = 512


def _moments(n: int, masks: np.ndarray, beta: float, fields: np.ndarray) -> np.ndarray:
    """Concatenated (magnetizations, pair correlations), chunked over graphs."""
    out = []
    for a in range(0, len(masks), CHUNK):
        m, c = batch_moments(n, masks[a : a + CHUNK], beta, fields)
        out.append(np.concatenate([m, c], axis=-1))
    return np.concatenate(out, axis=0)


def _grown_masks(masks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Every graph with one absent edge added; returns (parent row, new mask)."""
    rows, slots = np.nonzero(masks == 0)
    grown = masks[rows].copy()
    grown[np.arange(rows.size), slots] = 1
    return rows, grown


def griffiths_report(n: int, betas=(0.0, 0.3, 0.8), fields=(0.1, 0.5)) -> dict:
    """Largest decrease of any moment under a beta step, a B step or an added edge."""
    masks = edge_masks(n, connected_graphs(n))
    grid = {(b, B): _moments(n, masks, b, np.full(n, B)) for b in betas for B in fields}
    worst = {"beta": -np.inf, "field": -np.inf, "edge": -np.inf}
    for B in fields:
        for lo, hi in zip(betas[:-1], betas[1:]):
            worst["beta"] = max(worst["beta"], float(np.max(grid[(lo, B)] - grid[(hi, B)])))
    for b in betas:
        for lo, hi in zip(fields[:-1], fields[1:]):
            worst["field"] = max(worst["field"], float(np.max(grid[(b, lo)] - grid[(b, hi)])))
    rows, grown = _grown_masks(masks)
    if rows.size:
        for b in betas:
            for B in fields:
                bigger = _moments(n, grown, b, np.full(n, B))
                worst["edge"] = max(worst["edge"], float(np.max(grid[(b, B)][rows] - bigger)))
    worst["graphs"] = len(masks)
    return worst


def _ghs_fields(n: int, base: float, delta: float) -> tuple[np.ndarray, list[tuple[int, int, int, int]]]:
    """Field vectors plus, for each pair ``k <= l``, the indices of the four
    corners ``B``, ``B + d e_k``, ``B + d e_l``, ``B + d e_k + d e_l``."""
    vecs = [np.full(n, base)]
    index = {(): 0}

    def add(key, shift):
        if key not in index:
            index[key] = len(vecs)
            v = np.full(n, base)
            for i in shift:
                v[i] += delta
            vecs.append(v)
        return index[key]

    corners = []
    for k, l in itertools.combinations_with_replacement(range(n), 2):
        a = add((k,), (k,))
        b = add((l,), (l,))
        c = add(tuple(sorted((k, l))) + ("kl",), (k, l))
        corners.append((0, a, b, c))
    return np.array(vecs), corners


def ghs_report(n: int, betas=(0.0, 0.3, 0.8), fields=(0.1, 0.5), delta: float = 0.05) -> dict:
    """Largest mixed second difference of any magnetization in any two fields.

    For ``k == l`` the difference is ``m(B + 2d e_k) - 2 m(B + d e_k) + m(B)``,
    so every corner stays in the nonnegative orthant.
    """
    masks = edge_masks(n, connected_graphs(n))
    worst = -np.inf
    for base in fields:
        F, corners = _ghs_fields(n, base, delta)
        c = np.array(corners)
        for b in betas:
            for a in range(0, len(masks), CHUNK):
                m, _ = batch_moments(n, masks[a : a + CHUNK], b, F)  # (G, F, n)
                d2 = m[:, c[:, 3]] - m[:, c[:, 1]] - m[:, c[:, 2]] + m[:, c[:, 0]]
                worst = max(worst, float(d2.max()))
    return {"ghs": worst, "graphs": len(masks)}
