"""Weighted digraphs, their Laplacian/incidence matrices and topology classes.

Edge convention: an edge ``(j, i, w)`` means node ``i`` receives from node
``j``, so the adjacency entry ``A[i, j] = w``.  Undirected graphs are stored
as both directions with equal weight.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Base class for invalid graph input."""


class SelfLoopError(GraphError):
    pass


class NonPositiveWeightError(GraphError):
    pass


class DuplicateEdgeError(GraphError):
    pass


class IndexOutOfRangeError(GraphError):
    pass


class InvalidEdgeOrderError(GraphError):
    pass


class NotStronglyConnectedError(GraphError):
    pass


Edge = tuple[int, int, Real]


@dataclass(frozen=True)
class WeightedDigraph:
    n: int
    edges: tuple[Edge, ...]
    labels: tuple[str, ...] | None = None
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {(j, i): w for j, i, w in self.edges})

    def weight(self, j: int, i: int):
        """Weight of edge j -> i, or 0 when absent."""
        return self._index.get((j, i), 0)

    def has_edge(self, j: int, i: int) -> bool:
        return (j, i) in self._index

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for j, i, w in self.edges:
            A[i, j] = float(w)
        return A

    def in_neighbors(self, i: int) -> list[int]:
        return [j for j, k, _ in self.edges if k == i]

    def out_neighbors(self, j: int) -> list[int]:
        return [i for k, i, _ in self.edges if k == j]

    def in_degree(self, i: int):
        return sum((w for j, k, w in self.edges if k == i), 0)

    def reversed(self) -> WeightedDigraph:
        return WeightedDigraph(self.n, tuple((i, j, w) for j, i, w in self.edges), self.labels)

    def permuted(self, perm: Sequence[int]) -> WeightedDigraph:
        """Relabel node ``k`` as ``perm[k]``."""
        labels = None
        if self.labels is not None:
            labels = [""] * self.n
            for k, lab in enumerate(self.labels):
                labels[perm[k]] = lab
            labels = tuple(labels)
        return WeightedDigraph(
            self.n, tuple((perm[j], perm[i], w) for j, i, w in self.edges), labels
        )

    def to_json(self) -> dict:
        out = {"n": self.n, "edges": [[j, i, _json_number(w)] for j, i, w in self.edges]}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out


def _json_number(w):
    if isinstance(w, Fraction):
        return int(w) if w.denominator == 1 else str(w)
    return w


def build_graph(
    n: int, edges: Iterable[Sequence], labels: Sequence[str] | None = None
) -> WeightedDigraph:
    """Validate ``(j, i, weight)`` triples and build a graph on ``n`` nodes."""
    if not isinstance(n, int) or n < 1:
        raise GraphError(f"node count must be a positive integer, got {n!r}")
    seen = set()
    clean = []
    for k, edge in enumerate(edges):
        if len(edge) != 3:
            raise GraphError(f"edge #{k} {edge!r}: expected [source, target, weight]")
        j, i, w = edge
        if not (isinstance(j, int) and isinstance(i, int)) or not (0 <= j < n and 0 <= i < n):
            raise IndexOutOfRangeError(f"edge #{k} {list(edge)!r}: node index outside 0..{n - 1}")
        if j == i:
            raise SelfLoopError(f"edge #{k} {list(edge)!r}: self-loops are not allowed")
        if isinstance(w, bool) or not isinstance(w, Real) or not w > 0 or not np.isfinite(float(w)):
            raise NonPositiveWeightError(f"edge #{k} {list(edge)!r}: weight must be a finite positive number")
        if (j, i) in seen:
            raise DuplicateEdgeError(f"edge #{k} {list(edge)!r}: duplicate edge {j}->{i}")
        seen.add((j, i))
        clean.append((j, i, w))
    if labels is not None:
        labels = tuple(str(s) for s in labels)
        if len(labels) != n:
            raise GraphError(f"expected {n} labels, got {len(labels)}")
    return WeightedDigraph(n, tuple(clean), labels)


def graph_from_json(data: dict) -> WeightedDigraph:
    edges = [(j, i, _parse_weight(w)) for j, i, w in data["edges"]]
    return build_graph(data["n"], edges, data.get("labels"))


def _parse_weight(w):
    if isinstance(w, str):
        return Fraction(w)
    return w


def load_graph(path) -> WeightedDigraph:
    with open(path) as fh:
        return graph_from_json(json.load(fh))


# -- helpers -----------------------------------------------------------------


def undirected(n: int, pairs: Iterable[Sequence], labels=None) -> WeightedDigraph:
    """Graph with both directions for each ``(a, b[, weight])`` pair."""
    edges = []
    for pair in pairs:
        a, b = pair[0], pair[1]
        w = pair[2] if len(pair) > 2 else 1
        edges += [(a, b, w), (b, a, w)]
    return build_graph(n, edges, labels)


def directed_ring(n: int, weights: Sequence | None = None) -> WeightedDigraph:
    weights = weights or [1] * n
    return build_graph(n, [(k, (k + 1) % n, weights[k]) for k in range(n)])


def directed_path(n: int, weights: Sequence | None = None) -> WeightedDigraph:
    weights = weights or [1] * (n - 1)
    return build_graph(n, [(k, k + 1, weights[k]) for k in range(n - 1)])


def complete(n: int, weight=1) -> WeightedDigraph:
    return build_graph(n, [(j, i, weight) for j in range(n) for i in range(n) if i != j])


# -- matrices ----------------------------------------------------------------


def laplacian(g: WeightedDigraph) -> np.ndarray:
    """``L = D_in - A``; each diagonal entry is the sum of its own row's weights."""
    L = np.zeros((g.n, g.n))
    for j, i, w in g.edges:
        L[i, j] -= float(w)
    for i in range(g.n):
        L[i, i] = -sum(L[i, j] for j in range(g.n) if j != i)
    return L


def laplacian_exact(g: WeightedDigraph) -> list[list[Fraction]]:
    """Laplacian with entries as Fractions (floats are converted exactly)."""
    L = [[Fraction(0)] * g.n for _ in range(g.n)]
    for j, i, w in g.edges:
        L[i][j] -= Fraction(w)
        L[i][i] += Fraction(w)
    return L


def incidence_matrix(g: WeightedDigraph, edge_order: Sequence | None = None) -> np.ndarray:
    """Unweighted n x m incidence matrix: +1 at the edge's source, -1 at its target.

    ``edge_order`` lists ``(j, i)`` pairs (weights optional); it must be a
    permutation of the graph's edges.  Defaults to the stored edge order.
    """
    if edge_order is None:
        order = [(j, i) for j, i, _ in g.edges]
    else:
        order = [(e[0], e[1]) for e in edge_order]
        if len(order) != len(g.edges) or set(order) != {(j, i) for j, i, _ in g.edges}:
            raise InvalidEdgeOrderError("edge_order must be a permutation of the graph's edges")
    B = np.zeros((g.n, len(order)))
    for k, (j, i) in enumerate(order):
        B[j, k] = 1.0
        B[i, k] = -1.0
    return B


# -- topology ----------------------------------------------------------------


def strongly_connected_components(g: WeightedDigraph) -> list[list[int]]:
    """Tarjan's algorithm with an explicit stack; components in reverse topological order."""
    succ = [[] for _ in range(g.n)]
    for j, i, _ in g.edges:
        succ[j].append(i)
    index = [-1] * g.n
    low = [0] * g.n
    on_stack = [False] * g.n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(g.n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pos = work.pop()
            if pos == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            descended = False
            for k in range(pos, len(succ[v])):
                u = succ[v][k]
                if index[u] == -1:
                    work.append((v, k + 1))
                    work.append((u, 0))
                    descended = True
                    break
                if on_stack[u]:
                    low[v] = min(low[v], index[u])
            if descended:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    u = stack.pop()
                    on_stack[u] = False
                    comp.append(u)
                    if u == v:
                        break
                comps.append(sorted(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return comps


@dataclass(frozen=True)
class TopologyClass:
    undirected: bool
    strongly_connected: bool
    directed_ring: bool
    roots: frozenset[int]

    @property
    def has_spanning_tree(self) -> bool:
        return bool(self.roots)

    @property
    def general(self) -> bool:
        return not (self.undirected or self.has_spanning_tree)

    def flags(self) -> list[str]:
        out = []
        if self.undirected:
            out.append("Undirected")
        if self.strongly_connected:
            out.append("StronglyConnected")
        if self.directed_ring:
            out.append("DirectedRing")
        if self.has_spanning_tree:
            out.append("HasSpanningTree")
        if not out:
            out.append("General")
        return out


def classify(g: WeightedDigraph) -> TopologyClass:
    A = g.adjacency()
    is_undirected = bool(np.array_equal(A, A.T))
    comps = strongly_connected_components(g)
    comp_of = {v: c for c, comp in enumerate(comps) for v in comp}
    has_incoming = [False] * len(comps)
    for j, i, _ in g.edges:
        if comp_of[j] != comp_of[i]:
            has_incoming[comp_of[i]] = True
    sources = [c for c in range(len(comps)) if not has_incoming[c]]
    roots = frozenset(comps[sources[0]]) if len(sources) == 1 else frozenset()
    indeg = [0] * g.n
    outdeg = [0] * g.n
    for j, i, _ in g.edges:
        outdeg[j] += 1
        indeg[i] += 1
    ring = (
        g.n >= 2
        and len(comps) == 1
        and all(d == 1 for d in indeg)
        and all(d == 1 for d in outdeg)
    )
    return TopologyClass(
        undirected=is_undirected,
        strongly_connected=len(comps) == 1,
        directed_ring=ring,
        roots=roots,
    )


def left_null_vector(g: WeightedDigraph) -> np.ndarray:
    """Positive ``w`` with ``w^T L = 0`` and ``sum(w) = 1``."""
    if not classify(g).strongly_connected:
        raise NotStronglyConnectedError("left null vector requires a strongly connected graph")
    L = laplacian(g)
    M = np.vstack([L.T, np.ones((1, g.n))])
    rhs = np.zeros(g.n + 1)
    rhs[-1] = 1.0
    w, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    if np.any(w <= 1e-12):
        raise NotStronglyConnectedError(f"null vector not positive: {w}")
    return w / w.sum()

