"""Preprocessing of raw attention tensors into solver inputs.

Cross-attention stacks are averaged over their leading axis, upsampled to
the working resolution, and flattened into saliency vectors. Self-attention
becomes the affinity matrix after symmetrization, and the saliency vector
parameterizes the diagonal confidence weights sigma(alpha * m0)^2.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import DataError, ShapeError, ValidationError


def average_stack(stack) -> np.ndarray:
    """Elementwise mean over the leading axis of a B x r x r stack."""
    a = np.asarray(stack, dtype=np.float64)
    if a.ndim != 3:
        raise ShapeError(f"expected a B x r x r stack, got shape {a.shape}")
    if a.shape[0] == 0:
        raise DataError("empty stack: need at least one attention map")
    if not np.all(np.isfinite(a)):
        raise DataError("attention stack contains non-finite values")
    return a.mean(axis=0)


def upsample(grid, gamma: int) -> np.ndarray:
    """Corner-aligned bilinear upsampling by an integer factor.

    Output sample i along an axis of length n maps to input coordinate
    i * (n - 1) / (N - 1), so the four corners are reproduced and every
    output value is a convex combination of inputs (the output range never
    exceeds the input range). gamma == 1 returns a copy of the input.
    """
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2:
        raise ShapeError(f"expected a 2-D map, got shape {g.shape}")
    if isinstance(gamma, bool) or not isinstance(gamma, (int, np.integer)) or gamma < 1:
        raise ValidationError(f"gamma must be an integer >= 1, got {gamma!r}")
    if gamma == 1:
        return g.copy()
    out = g
    for axis in (0, 1):
        out = _lerp_axis(out, out.shape[axis] * gamma, axis)
    return out


def _lerp_axis(a: np.ndarray, new_len: int, axis: int) -> np.ndarray:
    old_len = a.shape[axis]
    if old_len == 1:
        return np.repeat(a, new_len, axis=axis)
    pos = np.arange(new_len) * ((old_len - 1) / (new_len - 1))
    lo = np.minimum(pos.astype(np.intp), old_len - 2)
    t = pos - lo
    t = t.reshape([-1 if ax == axis else 1 for ax in range(a.ndim)])
    left = np.take(a, lo, axis=axis)
    right = np.take(a, lo + 1, axis=axis)
    # a + t*(b - a) keeps every output inside [min(a, b), max(a, b)]
    return left + t * (right - left)


def flatten_map(grid) -> np.ndarray:
    """Row-major flattening of a square R x R map into a length R^2 vector."""
    g = np.asarray(grid)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ShapeError(f"expected a square 2-D map, got shape {g.shape}")
    return g.reshape(-1).copy()


def symmetrize(S, skip: bool = False) -> np.ndarray:
    """Return (S + S^T) / 2, exactly symmetric and idempotent.

    ``skip=True`` (the no-symmetrize ablation) returns the input unchanged
    apart from dtype normalization. Negative entries are rejected: affinity
    rows come from softmax outputs and must be nonnegative.
    """
    a = np.asarray(S, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError("affinity matrix contains non-finite values")
    if np.any(a < 0):
        raise DataError("affinity matrix contains negative entries")
    if skip:
        return a.copy()
    return 0.5 * (a + a.T)


def confidence_weights(m0, alpha: float, uniform: bool = False,
                       floor: float = 1e-8) -> np.ndarray:
    """Diagonal confidence weights max(floor, sigmoid(alpha * m0)^2).

    Squaring the sigmoid emphasizes large saliency values and suppresses
    small ones. With ``uniform=True`` (the uniform-weights ablation) every
    weight is 1. The floor keeps the weights strictly positive so the
    regularized system stays positive definite.
    """
    v = np.asarray(m0, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"expected a flat saliency vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DataError("saliency vector contains non-finite values")
    if not alpha > 0:
        raise ValidationError(f"alpha must be > 0, got {alpha!r}")
    if not 0.0 < floor <= 1.0:
        raise ValidationError(f"lambda_floor must be in (0, 1], got {floor!r}")
    if uniform:
        return np.ones_like(v)
    return np.maximum(floor, expit(alpha * v) ** 2)
