"""Directed communication graphs and admissible topology sets.

Edge convention used everywhere in this package: an edge ``(j, i)`` means
"agent j influences agent i", so the 0-1 adjacency matrix has
``chi[i, j] = 1`` iff ``(j, i)`` is an edge. Vertices are 0-indexed
internally; config files and exported artifacts use 1-indexed ids.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from collections.abc import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Digraph:
    """Directed graph on vertices ``0..n_vertices-1`` with mandatory self-loops.

    Self-loops are inserted automatically on construction; the switching
    framework assumes every admissible topology has them.
    """

    n_vertices: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n_vertices < 1:
            raise ValueError("n_vertices must be >= 1")
        edges = set()
        for e in self.edges:
            j, i = e
            if not (0 <= j < self.n_vertices and 0 <= i < self.n_vertices):
                raise ValueError(f"edge {e!r} out of range for N={self.n_vertices}")
            edges.add((int(j), int(i)))
        edges.update((v, v) for v in range(self.n_vertices))
        object.__setattr__(self, "edges", frozenset(edges))

    @classmethod
    def from_edges(cls, n_vertices: int, edges: Iterable[tuple[int, int]]) -> "Digraph":
        return cls(n_vertices, frozenset((j, i) for j, i in edges))

    @classmethod
    def complete(cls, n_vertices: int) -> "Digraph":
        es = frozenset(
            (j, i) for j in range(n_vertices) for i in range(n_vertices)
        )
        return cls(n_vertices, es)

    @classmethod
    def self_loops_only(cls, n_vertices: int) -> "Digraph":
        return cls(n_vertices, frozenset())

    def out_neighbors(self, j: int) -> list[int]:
        """Vertices i with an edge j -> i (i.e. influenced by j)."""
        return [i for (jj, i) in self.edges if jj == j]


def adjacency_matrix(g: Digraph) -> np.ndarray:
    """0-1 adjacency with ``chi[i, j] = 1`` iff ``(j, i)`` is an edge.

    The diagonal is all ones because self-loops are mandatory.
    """
    chi = np.zeros((g.n_vertices, g.n_vertices))
    for j, i in g.edges:
        chi[i, j] = 1.0
    return chi


def has_spanning_tree(g: Digraph) -> bool:
    """True iff some vertex reaches every other vertex along directed edges."""
    n = g.n_vertices
    out = [[] for _ in range(n)]
    for j, i in g.edges:
        if j != i:
            out[j].append(i)
    for root in range(n):
        seen = bytearray(n)
        seen[root] = 1
        stack = [root]
        count = 1
        while stack:
            v = stack.pop()
            for w in out[v]:
                if not seen[w]:
                    seen[w] = 1
                    count += 1
                    stack.append(w)
        if count == n:
            return True
    return False


def union_graph(gs: Sequence[Digraph]) -> Digraph:
    """Graph on the common vertex set whose edges are the union of all inputs."""
    if len(gs) == 0:
        raise ValueError("empty window")
    n = gs[0].n_vertices
    if any(g.n_vertices != n for g in gs):
        raise ValueError("union requires a common vertex set")
    edges: set = set()
    for g in gs:
        edges |= g.edges
    return Digraph(n, frozenset(edges))


@dataclass(frozen=True)
class TopologyEnsemble:
    """Admissible topology set with switching choice probabilities.

    ``probs[k]`` is the probability that a switch activates ``graphs[k]``.
    All probabilities must be strictly positive and sum to one.
    """

    graphs: tuple
    probs: tuple

    PROB_SUM_TOL = 1e-12

    def __post_init__(self):
        graphs = tuple(self.graphs)
        probs = tuple(float(p) for p in self.probs)
        if len(graphs) == 0:
            raise ValueError("ensemble needs at least one topology")
        if len(graphs) != len(probs):
            raise ValueError("graphs and probs length mismatch")
        n = graphs[0].n_vertices
        if any(g.n_vertices != n for g in graphs):
            raise ValueError("all topologies must share one vertex set")
        if any(p <= 0 for p in probs):
            raise ValueError("choice probabilities must be strictly positive")
        if abs(sum(probs) - 1.0) > self.PROB_SUM_TOL:
            raise ValueError(f"choice probabilities sum to {sum(probs)!r}, not 1")
        object.__setattr__(self, "graphs", graphs)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, graphs: Sequence[Digraph]) -> "TopologyEnsemble":
        k = len(graphs)
        return cls(tuple(graphs), tuple(1.0 / k for _ in range(k)))

    @property
    def n_topologies(self) -> int:
        return len(self.graphs)

    @property
    def n_vertices(self) -> int:
        return self.graphs[0].n_vertices

    def union(self) -> Digraph:
        return union_graph(self.graphs)

    def adjacency_stack(self) -> np.ndarray:
        """All adjacency matrices stacked as a (n_topologies, N, N) array."""
        return np.stack([adjacency_matrix(g) for g in self.graphs])
