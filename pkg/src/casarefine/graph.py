"""Patch-graph degree vector, Laplacian, and quadratic form.

The Laplacian L = D - S of a symmetric nonnegative affinity S is positive
semidefinite: x^T L x = 1/2 * sum_ij S(i,j) (x_i - x_j)^2 >= 0. Row sums of
L vanish, so constant vectors are in its nullspace.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sparse

from .errors import DataError, ShapeError

# above this node count the Laplacian is returned in CSR form
DENSE_NODE_LIMIT = 4096


def _check_affinity(S, allow_asymmetric: bool) -> np.ndarray:
    a = np.asarray(S, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square affinity matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError("affinity matrix contains non-finite values")
    if np.any(a < 0):
        raise DataError("affinity matrix contains negative entries")
    if not allow_asymmetric and not np.array_equal(a, a.T):
        raise DataError("affinity matrix is not symmetric; symmetrize it first")
    return a


def degree(S, allow_asymmetric: bool = False) -> np.ndarray:
    """Row sums of the affinity matrix, D(i,i) = sum_j S(i,j)."""
    return _check_affinity(S, allow_asymmetric).sum(axis=1)


def laplacian(S, allow_asymmetric: bool = False,
              dense_node_limit: int = DENSE_NODE_LIMIT,
              sparsify_rel_tol: float | None = None):
    """Graph Laplacian L = diag(degree(S)) - S.

    ``allow_asymmetric`` exists only for the no-symmetrize ablation; the
    resulting L is then not guaranteed positive semidefinite.

    ``sparsify_rel_tol`` optionally zeroes entries below tol * max(row max
    of either endpoint) before building L. This is an approximation for
    large graphs; degrees are recomputed after dropping so row sums of L
    still vanish. Returns a dense ndarray up to ``dense_node_limit`` nodes
    and a scipy CSR matrix above it.
    """
    a = _check_affinity(S, allow_asymmetric)
    if sparsify_rel_tol is not None:
        row_max = a.max(axis=1)
        cut = sparsify_rel_tol * np.maximum(row_max[:, None], row_max[None, :])
        a = np.where(a < cut, 0.0, a)
    d = a.sum(axis=1)
    L = np.diag(d) - a
    if L.shape[0] > dense_node_limit:
        return sparse.csr_matrix(L)
    return L


def quadratic_form(L, x) -> float:
    """x^T L x, computed in matrix form (works for dense and CSR L)."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"expected a vector, got shape {v.shape}")
    if L.shape[1] != v.shape[0]:
        raise ShapeError(f"dimension mismatch: L is {L.shape}, x has length {v.shape[0]}")
    return float(v @ (L @ v))
