"""Graph-regularized refinement of attention saliency maps into edit masks,
plus the selective embedding-pruning operator and a synthetic benchmark."""

import os as _os

# Cap BLAS parallelism before numpy loads anywhere in this package. Only
# effective when this package is imported before numpy; a fixed thread count
# also keeps BLAS reductions, and therefore results, bit-reproducible.
_threads = _os.environ.get("CASA_REFINE_THREADS", "")
if _threads.isdigit() and int(_threads) > 0:
    for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from .arrayio import read_array, write_array
from .attention import (
    average_stack,
    confidence_weights,
    flatten_map,
    symmetrize,
    upsample,
)
from .bench import (
    BenchReport,
    BenchRow,
    Scenario,
    generate_scenario,
    iou,
    run_suite,
    standard_config,
)
from .config import RefineConfig, load_config
from .errors import (
    DataError,
    FormatError,
    GenerationError,
    LengthMismatchError,
    NumericalError,
    RefineError,
    ShapeError,
    UnsupportedDtypeError,
    ValidationError,
)
from .graph import degree, laplacian, quadratic_form
from .pipeline import (
    PipelineResult,
    blend_latents,
    fuse_max,
    resize_mask_nearest,
    run_pipeline,
    threshold,
)
from .pruning import apply_threshold, interpolate, percentile_threshold, prune
from .solver import RefineResult, gradient, objective, refine, solve_cg, solve_dense

__all__ = [
    "__version__",
    "read_array", "write_array",
    "average_stack", "upsample", "flatten_map", "symmetrize", "confidence_weights",
    "degree", "laplacian", "quadratic_form",
    "RefineResult", "objective", "gradient", "solve_dense", "solve_cg", "refine",
    "PipelineResult", "fuse_max", "threshold", "blend_latents",
    "resize_mask_nearest", "run_pipeline",
    "prune", "percentile_threshold", "apply_threshold", "interpolate",
    "Scenario", "BenchRow", "BenchReport", "generate_scenario", "iou",
    "run_suite", "standard_config",
    "RefineConfig", "load_config",
    "RefineError", "ValidationError", "ShapeError", "DataError", "FormatError",
    "UnsupportedDtypeError", "LengthMismatchError", "GenerationError",
    "NumericalError",
]
