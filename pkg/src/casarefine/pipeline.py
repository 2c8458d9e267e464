"""Dual-branch orchestration from raw attention tensors to a binary mask.

Each branch (source and target) is averaged, upsampled, flattened, and
refined with its own confidence weights. The two refined maps are fused by
elementwise maximum, thresholded at delta, and the resulting binary mask
can be used to blend latent tensors: mask * z_tgt + (1 - mask) * z_src.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .attention import average_stack, flatten_map, upsample
from .config import RefineConfig
from .errors import RefineError, ShapeError, ValidationError
from .solver import RefineResult, refine


@contextmanager
def _stage(name: str):
    """Prefix any pipeline error with the stage it came from."""
    try:
        yield
    except RefineError as exc:
        exc.args = (f"[{name}] {exc.args[0]}",) + exc.args[1:]
        raise


def fuse_max(m_src, m_tgt) -> np.ndarray:
    """Elementwise maximum of the two refined maps."""
    a = np.asarray(m_src)
    b = np.asarray(m_tgt)
    if a.shape != b.shape:
        raise ShapeError(f"cannot fuse maps of shapes {a.shape} and {b.shape}")
    return np.maximum(a, b)


def threshold(m_star, delta: float) -> np.ndarray:
    """Binary mask: 1 where the value is >= delta, else 0 (uint8).

    The comparison is >= so boundary-valued entries are kept; raising delta
    never adds 1-entries.
    """
    a = np.asarray(m_star)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D map, got shape {a.shape}")
    if not np.isfinite(delta):
        raise ValidationError(f"delta must be finite, got {delta!r}")
    return (a >= delta).astype(np.uint8)


def blend_latents(mask, z_tgt, z_src) -> np.ndarray:
    """mask * z_tgt + (1 - mask) * z_src as an exact entrywise selection.

    The mask covers the trailing two dimensions and broadcasts across any
    leading channel/batch dimensions. Entries are copied verbatim from one
    of the two inputs, so wherever they agree the output agrees too.
    """
    m = np.asarray(mask)
    zt = np.asarray(z_tgt)
    zs = np.asarray(z_src)
    if m.ndim != 2:
        raise ShapeError(f"mask must be 2-D, got shape {m.shape}")
    if zt.shape != zs.shape:
        raise ShapeError(f"latents must share a shape, got {zt.shape} and {zs.shape}")
    if zt.ndim < 2 or zt.shape[-2:] != m.shape:
        raise ShapeError(
            f"latent trailing dims {zt.shape[-2:] if zt.ndim >= 2 else zt.shape} "
            f"must equal mask shape {m.shape}"
        )
    return np.where(m.astype(bool), zt, zs)


def resize_mask_nearest(mask, side: int) -> np.ndarray:
    """Nearest-neighbor resize of a binary mask to side x side.

    Output cell (i, j) copies input cell (floor(i*r/side), floor(j*r/side)).
    Used when latents live at a different spatial resolution than the mask.
    """
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ShapeError(f"mask must be 2-D, got shape {m.shape}")
    if side < 1:
        raise ValidationError(f"side must be >= 1, got {side!r}")
    rows = (np.arange(side) * m.shape[0]) // side
    cols = (np.arange(side) * m.shape[1]) // side
    return m[np.ix_(rows, cols)]


@dataclass
class PipelineResult:
    mask: np.ndarray        # R x R uint8
    m_star_src: np.ndarray  # R x R refined source saliency
    m_star_tgt: np.ndarray  # R x R refined target saliency
    fused: np.ndarray       # R x R elementwise max of the two
    report: dict


def _prepare_branch(stack, gamma: int, name: str) -> np.ndarray:
    with _stage(f"cross-{name}"):
        mean = average_stack(stack)
        if mean.shape[0] != mean.shape[1]:
            raise ShapeError(f"attention maps must be square, got {mean.shape}")
        return flatten_map(upsample(mean, gamma))


def _refine_branch(m0: np.ndarray, self_map, side: int, config: RefineConfig,
                   name: str) -> RefineResult:
    with _stage(f"refine-{name}"):
        s = np.asarray(self_map)
        n = side * side
        if s.shape != (n, n):
            raise ShapeError(
                f"self-attention must be {n} x {n} for side {side}, got {s.shape}"
            )
        return refine(m0, s, config)


def run_pipeline(cross_src, cross_tgt, self_src, self_tgt,
                 config: RefineConfig, jobs: int = 1) -> PipelineResult:
    """Refine both branches, fuse, and threshold.

    ``cross_*`` are B x r x r cross-attention stacks; ``self_*`` are
    R^2 x R^2 self-attention matrices at the upsampled resolution
    R = gamma * r. Branches are independent; with jobs > 1 they run in
    parallel threads with results identical to sequential execution.

    Outputs are float32 when both cross stacks are float32, else float64
    (the mask is uint8 either way). All solver math is float64 internally.
    """
    t0 = time.perf_counter()
    out_dtype = np.float32 if all(
        np.asarray(c).dtype == np.float32 for c in (cross_src, cross_tgt)
    ) else np.float64

    m0_src = _prepare_branch(cross_src, config.gamma, "src")
    m0_tgt = _prepare_branch(cross_tgt, config.gamma, "tgt")
    if m0_src.size != m0_tgt.size:
        raise ShapeError(
            f"branches disagree on resolution: {m0_src.size} vs {m0_tgt.size} patches"
        )
    side = int(round(m0_src.size ** 0.5))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fut_src = pool.submit(_refine_branch, m0_src, self_src, side, config, "src")
            fut_tgt = pool.submit(_refine_branch, m0_tgt, self_tgt, side, config, "tgt")
            res_src, res_tgt = fut_src.result(), fut_tgt.result()
    else:
        res_src = _refine_branch(m0_src, self_src, side, config, "src")
        res_tgt = _refine_branch(m0_tgt, self_tgt, side, config, "tgt")

    grid_src = res_src.m_star.reshape(side, side)
    grid_tgt = res_tgt.m_star.reshape(side, side)
    with _stage("fuse"):
        fused = fuse_max(grid_src, grid_tgt)
        mask = threshold(fused, config.delta)

    def branch_report(res: RefineResult) -> dict:
        return {
            "objective_initial": res.objective_initial,
            "objective_final": res.objective_final,
            "solver": res.solver_used,
            "cg_iterations": res.cg_iterations,
            "residual_norm": res.residual_norm,
            "converged": res.converged,
            "m_star_min": float(res.m_star.min()),
            "m_star_max": float(res.m_star.max()),
        }

    report = {
        "side": side,
        "gamma": config.gamma,
        "branches": {"src": branch_report(res_src), "tgt": branch_report(res_tgt)},
        "objective_initial": res_src.objective_initial + res_tgt.objective_initial,
        "objective_final": res_src.objective_final + res_tgt.objective_final,
        "solver": res_src.solver_used,
        "cg_iterations": res_src.cg_iterations + res_tgt.cg_iterations,
        "converged": res_src.converged and res_tgt.converged,
        "fused_min": float(fused.min()),
        "fused_max": float(fused.max()),
        "mask_ones": int(mask.sum()),
        "wall_ms": (time.perf_counter() - t0) * 1e3,
    }
    return PipelineResult(
        mask=mask,
        m_star_src=grid_src.astype(out_dtype),
        m_star_tgt=grid_tgt.astype(out_dtype),
        fused=fused.astype(out_dtype),
        report=report,
    )
