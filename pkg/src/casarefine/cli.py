"""Batch command-line surface.

Exactly one JSON object is printed to stdout per invocation; diagnostics go
to stderr. Exit codes: 0 success, 1 usage/validation, 2 data/format,
3 solver non-convergence (outputs are still written). Output files are
written atomically (temp file + rename) and identical inputs always rewrite
identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time

import numpy as np

from .arrayio import read_array, write_array
from .bench import REGION_SHAPES, STANDARD_SCENARIO, run_suite, standard_config
from .config import RefineConfig, read_config_mapping
from .errors import RefineError
from .pipeline import resize_mask_nearest, run_pipeline
from .pruning import SIGNS, interpolate, prune

PROG = "casa-refine"


def _emit(obj: dict) -> None:
    print(json.dumps(obj))


def _fail(command: str | None, exc: BaseException, code: int) -> int:
    _emit({"command": command, "error": str(exc), "exit_code": code})
    print(f"{PROG}: error: {exc}", file=sys.stderr)
    return code


class _Parser(argparse.ArgumentParser):
    """Argparse variant that keeps the one-JSON-object-per-run invariant
    and exits 1 (not 2) on usage errors."""

    def error(self, message):
        _emit({"command": None, "error": message, "exit_code": 1})
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; inline flags override it")
    p.add_argument("--alpha", type=float, default=None, help="confidence sharpness (> 0)")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="smoothness weight (>= 0)")
    p.add_argument("--delta", type=float, default=None, help="mask threshold in [0, 1]")
    p.add_argument("--gamma", type=int, default=None, help="upsampling factor (>= 1)")
    p.add_argument("--tau-percentile", type=float, default=None,
                   help="pruning percentile in [0, 100]")
    p.add_argument("--solver", choices=("dense", "cg", "auto"), default=None)
    p.add_argument("--cg-tol", type=float, default=None)
    p.add_argument("--cg-max-iter", type=int, default=None)
    p.add_argument("--lambda-floor", type=float, default=None)
    p.add_argument("--uniform-weights", action="store_true", default=None,
                   help="ablation: uniform confidence weights")
    p.add_argument("--no-symmetrize", action="store_true", default=None,
                   help="ablation: skip affinity symmetrization")


_FLAG_TO_KEY = {
    "alpha": "alpha", "lam": "lambda", "delta": "delta", "gamma": "gamma",
    "tau_percentile": "tau_percentile", "solver": "solver", "cg_tol": "cg_tol",
    "cg_max_iter": "cg_max_iter", "lambda_floor": "lambda_floor",
    "uniform_weights": "ablation_uniform_weights",
    "no_symmetrize": "ablation_no_symmetrize",
}


def _build_config(args, base: RefineConfig | None = None) -> RefineConfig:
    merged = (base if base is not None else RefineConfig()).to_dict()
    if args.config:
        merged.update(read_config_mapping(args.config))
    for attr, key in _FLAG_TO_KEY.items():
        value = getattr(args, attr, None)
        if value is not None:
            merged[key] = value
    return RefineConfig.from_mapping(merged)


def _atomic_write(path: str, writer) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".casa-tmp-")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_array_atomic(arr, path: str) -> None:
    _atomic_write(path, lambda tmp: write_array(arr, tmp))


def _write_text_atomic(text: str, path: str) -> None:
    def writer(tmp):
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    _atomic_write(path, writer)


def _build_parser() -> _Parser:
    parser = _Parser(prog=PROG, description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_ref = sub.add_parser("refine",
                           help="refine attention maps into a binary edit mask")
    p_ref.add_argument("--cross-src", required=True, help="B x r x r array file")
    p_ref.add_argument("--cross-tgt", required=True, help="B x r x r array file")
    p_ref.add_argument("--self-src", required=True, help="R^2 x R^2 array file")
    p_ref.add_argument("--self-tgt", required=True, help="R^2 x R^2 array file")
    p_ref.add_argument("--out-mask", required=True, help="output mask array file")
    p_ref.add_argument("--out-saliency", help="output fused refined map")
    p_ref.add_argument("--out-saliency-src", help="output refined source map")
    p_ref.add_argument("--out-saliency-tgt", help="output refined target map")
    p_ref.add_argument("--mask-side", type=int, default=None,
                       help="nearest-neighbor resize of the mask to this side")
    p_ref.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p_ref)

    p_pr = sub.add_parser("prune",
                          help="selective embedding interpolation")
    p_pr.add_argument("--src-img", required=True)
    p_pr.add_argument("--src-txt", required=True)
    p_pr.add_argument("--tgt-txt", required=True)
    p_pr.add_argument("--out", required=True)
    p_pr.add_argument("--sign", choices=SIGNS, default="paper")
    p_pr.add_argument("--config", help="JSON config file (tau_percentile)")
    p_pr.add_argument("--tau-percentile", type=float, default=None)

    p_be = sub.add_parser("bench",
                          help="synthetic spill-suppression benchmark")
    p_be.add_argument("--seeds", type=int, default=20, help="number of seeds")
    p_be.add_argument("--seed", type=int, default=0, help="first seed")
    p_be.add_argument("--side", type=int, default=STANDARD_SCENARIO["side"])
    p_be.add_argument("--scenario", choices=REGION_SHAPES,
                      default=STANDARD_SCENARIO["region_shape"])
    p_be.add_argument("--out-csv", required=True)
    p_be.add_argument("--noise-sigma", type=float,
                      default=STANDARD_SCENARIO["noise_sigma"])
    p_be.add_argument("--spill-count", type=int,
                      default=STANDARD_SCENARIO["spill_count"])
    p_be.add_argument("--spill-magnitude", type=float,
                      default=STANDARD_SCENARIO["spill_magnitude"])
    p_be.add_argument("--sigma-s", type=float, default=STANDARD_SCENARIO["sigma_s"])
    p_be.add_argument("--boost", type=float, default=STANDARD_SCENARIO["boost"])
    p_be.add_argument("--jobs", type=int, default=1)
    p_be.add_argument("--timings", action="store_true",
                      help="write measured wall_ms into the CSV "
                           "(off by default so reruns are byte-identical)")
    _add_config_flags(p_be)

    return parser


def _cmd_refine(args) -> int:
    t0 = time.perf_counter()
    config = _build_config(args)
    cross_src = read_array(args.cross_src)
    cross_tgt = read_array(args.cross_tgt)
    self_src = read_array(args.self_src)
    self_tgt = read_array(args.self_tgt)

    result = run_pipeline(cross_src, cross_tgt, self_src, self_tgt, config,
                          jobs=args.jobs)
    out_dtype = result.m_star_src.dtype
    mask = result.mask
    if args.mask_side is not None:
        mask = resize_mask_nearest(mask, args.mask_side)
    _write_array_atomic(mask.astype(out_dtype), args.out_mask)
    outputs = {"mask": args.out_mask}
    for flag, arr in (("out_saliency", result.fused),
                      ("out_saliency_src", result.m_star_src),
                      ("out_saliency_tgt", result.m_star_tgt)):
        path = getattr(args, flag)
        if path:
            _write_array_atomic(arr, path)
            outputs[flag[4:]] = path

    report = dict(result.report)
    report.pop("wall_ms", None)
    _emit({
        "command": "refine",
        "config": config.to_dict(),
        "objective_initial": report.pop("objective_initial"),
        "objective_final": report.pop("objective_final"),
        "solver": report.pop("solver"),
        "cg_iterations": report.pop("cg_iterations"),
        "wall_ms": (time.perf_counter() - t0) * 1e3,
        "outputs": outputs,
        **report,
    })
    return 0 if result.report["converged"] else 3


def _cmd_prune(args) -> int:
    t0 = time.perf_counter()
    config = _build_config(args)
    tau = config.tau_percentile
    src_img = read_array(args.src_img)
    src_txt = read_array(args.src_txt)
    tgt_txt = read_array(args.tgt_txt)
    out = interpolate(src_img, src_txt, tgt_txt, tau_percentile=tau, sign=args.sign)
    _write_array_atomic(out, args.out)
    diff = src_txt - tgt_txt if args.sign == "paper" else tgt_txt - src_txt
    kept = int(np.count_nonzero(prune(diff, tau)))
    _emit({
        "command": "prune",
        "config": {"tau_percentile": tau, "sign": args.sign},
        "objective_initial": None,
        "objective_final": None,
        "solver": None,
        "cg_iterations": None,
        "wall_ms": (time.perf_counter() - t0) * 1e3,
        "outputs": {"out": args.out},
        "dim": int(src_img.size),
        "kept_components": kept,
        "zeroed_components": int(src_img.size - kept),
    })
    return 0


def _cmd_bench(args) -> int:
    t0 = time.perf_counter()
    config = _build_config(args, base=standard_config())
    seeds = list(range(args.seed, args.seed + args.seeds))
    report = run_suite(
        config, seeds, side=args.side, region_shape=args.scenario,
        noise_sigma=args.noise_sigma, spill_count=args.spill_count,
        spill_magnitude=args.spill_magnitude, sigma_s=args.sigma_s,
        boost=args.boost, jobs=args.jobs,
    )
    _write_text_atomic(report.to_csv(timings=args.timings), args.out_csv)
    full = [r for r in report.rows if r.ablation == "full"]
    summary = report.summary()
    _emit({
        "command": "bench",
        "config": config.to_dict(),
        "objective_initial": float(np.mean([r.obj_initial for r in full])),
        "objective_final": float(np.mean([r.obj_final for r in full])),
        "solver": full[0].solver if full else None,
        "cg_iterations": int(sum(r.cg_iters for r in report.rows)),
        "wall_ms": (time.perf_counter() - t0) * 1e3,
        "outputs": {"csv": args.out_csv},
        "scenario": {
            "side": args.side, "region_shape": args.scenario,
            "noise_sigma": args.noise_sigma, "spill_count": args.spill_count,
            "spill_magnitude": args.spill_magnitude, "sigma_s": args.sigma_s,
            "boost": args.boost, "seeds": seeds,
        },
        **summary,
    })
    return 0 if summary["unconverged_rows"] == 0 else 3


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 1
    command = args.command
    try:
        if command == "refine":
            return _cmd_refine(args)
        if command == "prune":
            return _cmd_prune(args)
        return _cmd_bench(args)
    except RefineError as exc:
        return _fail(command, exc, exc.exit_code)
    except OSError as exc:
        return _fail(command, exc, 2)


if __name__ == "__main__":
    sys.exit(main())
