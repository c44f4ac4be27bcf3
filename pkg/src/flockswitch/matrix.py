"""Row-stochastic matrix algebra for the velocity update flow.

The per-step velocity update is ``V[t+1] = M V[t]`` with
``M = Id - (h/N)(D - A)`` built from the active topology and the
communication weight evaluated at current pairwise distances. Products of
these matrices over time windows drive all contraction estimates, so the
ergodicity coefficient and scrambling tests live here as well.
"""
from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from .graph import Digraph, adjacency_matrix

if TYPE_CHECKING:
    from .dynamics import CommunicationWeight


def diameter(rows: np.ndarray) -> float:
    """Max Euclidean distance between any two rows (0 for a single row)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[0] < 2:
        return 0.0
    diff = rows[:, None, :] - rows[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=-1)).max())


def is_stochastic(a: np.ndarray, tol: float = 1e-12) -> bool:
    """True iff all entries >= -tol and every row sum is within tol of 1."""
    a = np.asarray(a, dtype=float)
    if a.min(initial=0.0) < -tol:
        return False
    return bool(np.abs(a.sum(axis=1) - 1.0).max() <= tol)


def ergodicity_coefficient(a: np.ndarray) -> float:
    """min over row pairs of the summed entrywise minima.

    Zero iff some pair of rows has disjoint supports; equals 1 when all
    rows coincide. For a 1x1 matrix returns the single entry.
    """
    a = np.asarray(a, dtype=float)
    if a.min() < 0:
        raise ValueError("not nonnegative")
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    pair_sums = np.minimum(a[:, None, :], a[None, :, :]).sum(axis=-1)
    iu = np.triu_indices(n, k=1)
    return float(pair_sums[iu].min())


def is_scrambling(a: np.ndarray) -> bool:
    """True iff every pair of rows shares a column where both are positive.

    Equivalent to ``ergodicity_coefficient(a) > 0``; implemented by the
    pairwise-column definition directly.
    """
    a = np.asarray(a, dtype=float)
    if a.min() < 0:
        raise ValueError("not nonnegative")
    n = a.shape[0]
    if n == 1:
        return bool(a[0, 0] > 0)
    pos = a > 0
    shares = (pos[:, None, :] & pos[None, :, :]).any(axis=-1)
    iu = np.triu_indices(n, k=1)
    return bool(shares[iu].all())


def pairwise_distances(positions: np.ndarray) -> np.ndarray:
    positions = np.asarray(positions, dtype=float)
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def update_matrix(
    positions: np.ndarray,
    g: Digraph,
    h: float,
    w: "CommunicationWeight",
) -> np.ndarray:
    """One-step velocity update matrix ``Id - (h/N)(D - A)``.

    ``A[i, j] = chi[i, j] * phi(||x_i - x_j||)`` and ``D`` is the diagonal
    of row sums of ``A``. Row-stochastic and nonnegative whenever
    ``0 < h * phi(0) < 1``; self-loop terms cancel between D and A.
    """
    if not 0.0 < h * w.kappa < 1.0:
        raise ValueError(
            f"stability condition violated: need 0 < h*kappa < 1, got {h * w.kappa}"
        )
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    chi = adjacency_matrix(g)
    if chi.shape[0] != n:
        raise ValueError("positions and topology disagree on N")
    a = chi * w(pairwise_distances(positions))
    d = a.sum(axis=1)
    m = (h / n) * a
    m[np.diag_indices(n)] += 1.0 - (h / n) * d
    return m


def flow_product(ms) -> np.ndarray:
    """Ordered product of update matrices, earliest first.

    ``flow_product([M0, M1])`` returns ``M1 @ M0``: each new step matrix is
    applied on the left, matching ``V[t+1] = M[t] V[t]``.
    """
    ms = list(ms)
    if not ms:
        raise ValueError("empty window")
    acc = np.array(ms[0], dtype=float)
    n = acc.shape[0]
    for m in ms[1:]:
        m = np.asarray(m, dtype=float)
        if m.shape != (n, n):
            raise ValueError("dimension mismatch in flow product")
        acc = m @ acc
    return acc


def contraction_check(
    a: np.ndarray, z: np.ndarray, b: np.ndarray | None = None
) -> tuple[float, float]:
    """Evaluate both sides of the diameter contraction estimate.

    For ``W = A Z + B`` with ``A`` stochastic, returns
    ``(diameter(W), (1 - mu(A)) * diameter(Z) + sqrt(2) * ||B||_F)``.
    The caller asserts lhs <= rhs.
    """
    a = np.asarray(a, dtype=float)
    z = np.asarray(z, dtype=float)
    if not is_stochastic(a):
        raise ValueError("matrix is not stochastic")
    if b is None:
        b = np.zeros_like(z)
    b = np.asarray(b, dtype=float)
    w = a @ z + b
    lhs = diameter(w)
    rhs = (1.0 - ergodicity_coefficient(a)) * diameter(z) + np.sqrt(2.0) * float(
        np.linalg.norm(b, "fro")
    )
    return lhs, rhs
