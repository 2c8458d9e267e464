"""Hyperparameter bundle and its JSON loader.

Config files are flat UTF-8 JSON objects whose keys match the field names
below (the smoothness weight is spelled ``lambda`` in JSON and on the CLI;
the Python attribute is ``lam`` because ``lambda`` is a keyword).
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass
from typing import Any, Mapping

from .errors import FormatError, ValidationError

SOLVERS = ("dense", "cg", "auto")

# nodes at or below this count are solved densely when solver == "auto"
AUTO_DENSE_LIMIT = 4096

# JSON/CLI name -> attribute name, where they differ
_EXTERNAL_NAMES = {"lambda": "lam"}
_ATTR_TO_EXTERNAL = {v: k for k, v in _EXTERNAL_NAMES.items()}


@dataclass(frozen=True)
class RefineConfig:
    """All knobs for mask refinement.

    alpha: sharpness of the sigmoid confidence weights, > 0.
    lam: smoothness weight ("lambda" in JSON/CLI), >= 0.
    delta: binary mask threshold, in [0, 1].
    gamma: integer upsampling factor, >= 1.
    tau_percentile: pruning percentile for embedding offsets, in [0, 100].
    solver: "dense", "cg", or "auto" (dense up to 4096 nodes, cg above).
    cg_tol: relative residual tolerance for cg, > 0.
    cg_max_iter: cg iteration cap, >= 1; None means 10 * node count.
    ablation_uniform_weights: replace confidence weights with all ones.
    ablation_no_symmetrize: use the affinity matrix without symmetrizing.
    lambda_floor: lower bound on confidence weights, in (0, 1].
    """

    alpha: float = 1.0
    lam: float = 0.1
    delta: float = 0.3
    gamma: int = 2
    tau_percentile: float = 80.0
    solver: str = "auto"
    cg_tol: float = 1e-8
    cg_max_iter: int | None = None
    ablation_uniform_weights: bool = False
    ablation_no_symmetrize: bool = False
    lambda_floor: float = 1e-8

    def __post_init__(self):
        def fail(attr: str, requirement: str):
            name = _ATTR_TO_EXTERNAL.get(attr, attr)
            raise ValidationError(f"{name} must be {requirement}, "
                                  f"got {getattr(self, attr)!r}")

        def number(attr: str) -> float:
            v = getattr(self, attr)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                fail(attr, "a number")
            return float(v)

        if not number("alpha") > 0:
            fail("alpha", "> 0")
        if not number("lam") >= 0:
            fail("lam", ">= 0")
        if not 0.0 <= number("delta") <= 1.0:
            fail("delta", "in [0, 1]")
        g = self.gamma
        if isinstance(g, bool) or not isinstance(g, int) or g < 1:
            fail("gamma", "an integer >= 1")
        if not 0.0 <= number("tau_percentile") <= 100.0:
            fail("tau_percentile", "in [0, 100]")
        if self.solver not in SOLVERS:
            fail("solver", f"one of {SOLVERS}")
        if not number("cg_tol") > 0:
            fail("cg_tol", "> 0")
        it = self.cg_max_iter
        if it is not None and (isinstance(it, bool) or not isinstance(it, int) or it < 1):
            fail("cg_max_iter", "an integer >= 1 (or null)")
        for attr in ("ablation_uniform_weights", "ablation_no_symmetrize"):
            if not isinstance(getattr(self, attr), bool):
                fail(attr, "a boolean")
        if not 0.0 < number("lambda_floor") <= 1.0:
            fail("lambda_floor", "in (0, 1]")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any], warn_unknown: bool = True) -> "RefineConfig":
        """Build a config from JSON-style keys; unknown keys warn, not fail."""
        fields = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in mapping.items():
            attr = _EXTERNAL_NAMES.get(key, key)
            if attr not in fields:
                if warn_unknown:
                    warnings.warn(f"ignoring unknown config key {key!r}", stacklevel=2)
                continue
            if attr == "gamma" and isinstance(value, float) and value.is_integer():
                value = int(value)
            kwargs[attr] = value
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready dict using external key names."""
        out = {}
        for f in dataclasses.fields(self):
            out[_ATTR_TO_EXTERNAL.get(f.name, f.name)] = getattr(self, f.name)
        return out

    def replace(self, **changes) -> "RefineConfig":
        return dataclasses.replace(self, **changes)

    def resolve_solver(self, n_nodes: int) -> str:
        if self.solver == "auto":
            return "dense" if n_nodes <= AUTO_DENSE_LIMIT else "cg"
        return self.solver

    def resolve_cg_max_iter(self, n_nodes: int) -> int:
        return self.cg_max_iter if self.cg_max_iter is not None else 10 * n_nodes


def read_config_mapping(path) -> dict[str, Any]:
    """Read a config file as a raw dict (no field validation yet)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise OSError(f"failed to read config from {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise FormatError(f"config {path} must contain a JSON object")
    return raw


def load_config(path) -> RefineConfig:
    """Load and validate a JSON config file.

    Out-of-range values raise ValidationError naming the offending key;
    unknown keys emit a warning and are ignored.
    """
    return RefineConfig.from_mapping(read_config_mapping(path))
