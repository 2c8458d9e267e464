"""In-process bindings for diffusion pipelines.

Exposes mask refinement, embedding-offset pruning, and latent blending as
three functions operating directly on caller arrays, with no file round
trips. Results are numerically identical (bitwise on the float64 path) to
running the casarefine CLI on the same data.

Contiguous float arrays are passed through zero-copy; anything else is
copied once with a warning, because the solver kernels assume contiguous
layouts. No call ever mutates a caller buffer. Solver-heavy sections run
inside BLAS/LAPACK, which release the GIL, so concurrent calls from
multiple threads are safe.
"""

from __future__ import annotations

import warnings
from typing import Any, Mapping

import numpy as np

import casarefine
from casarefine import (
    DataError,
    FormatError,
    GenerationError,
    NumericalError,
    RefineConfig,
    RefineError,
    ShapeError,
    ValidationError,
)
from casarefine.pipeline import blend_latents, run_pipeline
from casarefine.pruning import interpolate

__version__ = casarefine.__version__

__all__ = [
    "__version__",
    "refine_masks",
    "prune_offset",
    "blend",
    "CopyWarning",
    "RefineError",
    "ValidationError",
    "ShapeError",
    "DataError",
    "FormatError",
    "GenerationError",
    "NumericalError",
]


class CopyWarning(UserWarning):
    """A non-contiguous or non-float input had to be copied."""


_FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


def _as_view(arr, name: str) -> np.ndarray:
    """Zero-copy view for contiguous float arrays; copying fallback otherwise."""
    a = np.asarray(arr)
    if a.dtype in _FLOAT_DTYPES and a.flags.c_contiguous:
        return a
    warnings.warn(
        f"{name}: copying non-contiguous or non-float input "
        f"(dtype {a.dtype}, contiguous={a.flags.c_contiguous})",
        CopyWarning,
        stacklevel=3,
    )
    return np.ascontiguousarray(a, dtype=np.float64)


def refine_masks(cross_src, cross_tgt, self_src, self_tgt,
                 config: Mapping[str, Any] | RefineConfig | None = None):
    """Refine both branches and return (mask, m_star_src, m_star_tgt, report).

    ``config`` is a mapping with RefineConfig keys ("lambda", "alpha", ...);
    invalid values raise ValidationError naming the field. The mask is uint8,
    the refined maps follow the input dtype, and the report is a plain dict.
    """
    if config is None:
        cfg = RefineConfig()
    elif isinstance(config, RefineConfig):
        cfg = config
    else:
        cfg = RefineConfig.from_mapping(config)
    result = run_pipeline(
        _as_view(cross_src, "cross_src"),
        _as_view(cross_tgt, "cross_tgt"),
        _as_view(self_src, "self_src"),
        _as_view(self_tgt, "self_tgt"),
        cfg,
    )
    return result.mask, result.m_star_src, result.m_star_tgt, dict(result.report)


def prune_offset(src_img, src_txt, tgt_txt, tau_percentile: float = 80.0,
                 sign: str = "paper") -> np.ndarray:
    """Image embedding plus the percentile-pruned text-embedding offset."""
    return interpolate(
        _as_view(src_img, "src_img"),
        _as_view(src_txt, "src_txt"),
        _as_view(tgt_txt, "tgt_txt"),
        tau_percentile=tau_percentile,
        sign=sign,
    )


def blend(mask, z_tgt, z_src) -> np.ndarray:
    """mask * z_tgt + (1 - mask) * z_src with exact entry selection.

    The mask covers the trailing two latent dimensions and broadcasts over
    leading channel dimensions.
    """
    m = np.asarray(mask)  # binary masks may be any integer/bool dtype
    return blend_latents(
        m,
        _as_view(z_tgt, "z_tgt"),
        _as_view(z_src, "z_src"),
    )
