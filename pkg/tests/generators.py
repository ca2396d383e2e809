"""Seeded random graphs and functions for the property and acceptance tests."""

from __future__ import annotations

import numpy as np

from filippov_consensus.graph import build_graph, undirected
from filippov_consensus.nonlinear import PiecewiseConstant


def _weight(rng):
    return float(rng.choice([0.5, 1.0, 1.0, 1.5, 2.0]))


def strongly_connected(rng, n):
    """Random Hamiltonian cycle plus extra random edges."""
    perm = rng.permutation(n)
    edges = {(int(perm[k]), int(perm[(k + 1) % n])) for k in range(n)} if n > 1 else set()
    for _ in range(int(rng.integers(0, n + 1)) if n > 1 else 0):
        j, i = (int(v) for v in rng.choice(n, 2, replace=False))
        edges.add((j, i))
    return build_graph(n, [(j, i, _weight(rng)) for j, i in sorted(edges)])


def spanning_tree_not_strong(rng, n, root_size=None):
    """Random tree grown from a root block, plus forward edges; never strongly connected.

    The root block (size ``root_size``) is itself a cycle, so the root set can
    have several nodes.
    """
    perm = [int(v) for v in rng.permutation(n)]
    r = root_size if root_size is not None else int(rng.integers(1, max(2, n // 2) + 1))
    r = min(r, n - 1)
    edges = set()
    if r > 1:
        edges |= {(perm[k], perm[(k + 1) % r]) for k in range(r)}
    for pos in range(r, n):
        parent = perm[int(rng.integers(0, pos))]
        edges.add((parent, perm[pos]))
    for _ in range(int(rng.integers(0, n))):
        a, b = sorted(int(v) for v in rng.choice(n, 2, replace=False))
        if b >= r:  # forward in the topological order, never into the root block
            edges.add((perm[a], perm[b]))
    return build_graph(n, [(j, i, _weight(rng)) for j, i in sorted(edges)])


def connected_undirected(rng, n):
    perm = [int(v) for v in rng.permutation(n)]
    pairs = {tuple(sorted((perm[int(rng.integers(0, k))], perm[k]))) for k in range(1, n)}
    for _ in range(int(rng.integers(0, n))):
        a, b = sorted(int(v) for v in rng.choice(n, 2, replace=False))
        pairs.add((a, b))
    return undirected(n, [(a, b, _weight(rng)) for a, b in sorted(pairs)])


def directed_tree(rng, n):
    """Pure directed spanning tree (one in-edge per non-root node)."""
    perm = [int(v) for v in rng.permutation(n)]
    edges = [(perm[int(rng.integers(0, k))], perm[k], _weight(rng)) for k in range(1, n)]
    return build_graph(n, edges)


def monotone_step(rng, lo=-4.0, hi=4.0):
    """Piecewise-constant nondecreasing map with lowest value < 0 < highest value."""
    k = int(rng.integers(1, 5))
    bps = sorted(set(float(v) for v in np.round(rng.uniform(lo, hi, k) * 4) / 4))
    vals = np.sort(np.round(rng.uniform(-3, 3, len(bps) + 1) * 2) / 2)
    vals[0] = min(vals[0], -0.5)
    vals[-1] = max(vals[-1], 0.5)
    return PiecewiseConstant(tuple(bps), tuple(float(v) for v in vals), str(rng.choice(["left", "right"])))
