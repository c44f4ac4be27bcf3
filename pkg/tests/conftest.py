import numpy as np
import pytest

from flockswitch.graph import Digraph


def random_digraph(rng: np.random.Generator, n: int, p_edge: float = 0.3) -> Digraph:
    mask = rng.random((n, n)) < p_edge
    edges = frozenset((j, i) for j in range(n) for i in range(n) if mask[j, i])
    return Digraph(n, edges)


def random_rooted_digraph(rng: np.random.Generator, n: int, extra: float = 0.15) -> Digraph:
    """Plant a random spanning arborescence, then sprinkle extra edges.

    Uniform random digraphs are rooted too often to stress product lemmas;
    planting keeps rootedness guaranteed while the rest stays sparse.
    """
    order = rng.permutation(n)
    edges = set()
    for idx in range(1, n):
        parent = order[rng.integers(0, idx)]
        edges.add((int(parent), int(order[idx])))
    mask = rng.random((n, n)) < extra
    edges.update(
        (j, i) for j in range(n) for i in range(n) if mask[j, i]
    )
    return Digraph(n, frozenset(edges))


def random_stochastic(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.random((n, n)) + 1e-3
    return a / a.sum(axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240917))
