"""Selective pruning of embedding offsets.

The pruning operator zeroes every component of an offset vector whose
magnitude falls below a percentile threshold of the absolute values,
keeping only the dominant directions. Kept components are copied verbatim.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, ValidationError

SIGNS = ("paper", "reversed")


def _check_vector(y, name: str = "vector") -> np.ndarray:
    v = np.asarray(y)
    if v.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {v.shape}")
    if v.size < 1:
        raise ShapeError(f"{name} must have at least one component")
    return v


def percentile_threshold(y, tau_percentile: float) -> float:
    """The tau_percentile-th percentile of |y|, by linear interpolation
    between order statistics."""
    v = _check_vector(y)
    if not 0.0 <= tau_percentile <= 100.0:
        raise ValidationError(
            f"tau_percentile must be in [0, 100], got {tau_percentile!r}"
        )
    return float(np.percentile(np.abs(v), tau_percentile))


def apply_threshold(y, tau: float) -> np.ndarray:
    """Keep components with |y_i| >= tau verbatim, zero the rest.

    Ties at tau are kept. Applying the same tau twice is exactly idempotent.
    """
    v = _check_vector(y)
    out = np.zeros_like(v)
    keep = np.abs(v) >= tau
    out[keep] = v[keep]
    return out


def prune(y, tau_percentile: float) -> np.ndarray:
    """Percentile-threshold pruning of y.

    The threshold never exceeds max(|y|), so a nonzero input always keeps
    at least its largest-magnitude component.
    """
    return apply_threshold(y, percentile_threshold(y, tau_percentile))


def interpolate(e_src_img, e_src_txt, e_tgt_txt, tau_percentile: float = 80.0,
                sign: str = "paper") -> np.ndarray:
    """Image embedding plus the pruned text-embedding offset.

    sign="paper" adds prune(e_src_txt - e_tgt_txt); sign="reversed" flips
    the difference. With tau_percentile=0 every component passes and the
    unpruned interpolation is recovered exactly.
    """
    img = _check_vector(e_src_img, "e_src_img")
    src = _check_vector(e_src_txt, "e_src_txt")
    tgt = _check_vector(e_tgt_txt, "e_tgt_txt")
    if not img.shape == src.shape == tgt.shape:
        raise ShapeError(
            f"embedding dims differ: {img.shape}, {src.shape}, {tgt.shape}"
        )
    if sign not in SIGNS:
        raise ValidationError(f"sign must be one of {SIGNS}, got {sign!r}")
    diff = src - tgt if sign == "paper" else tgt - src
    return img + prune(diff, tau_percentile)
