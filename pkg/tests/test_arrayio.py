import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casarefine.arrayio import read_array, write_array
from casarefine.config import RefineConfig, load_config
from casarefine.errors import (
    FormatError,
    LengthMismatchError,
    UnsupportedDtypeError,
    ValidationError,
)


def roundtrip(arr, path):
    write_array(arr, path)
    return read_array(path)


def test_roundtrip_2x2_float32(tmp_path):
    arr = np.array([[1, 2], [3, 4]], dtype=np.float32)
    got = roundtrip(arr, tmp_path / "a.npy")
    assert got.shape == (2, 2)
    assert got.dtype == np.float32
    assert got.tobytes() == arr.tobytes()


def test_roundtrip_degenerate_scalar(tmp_path):
    arr = np.array([0.0], dtype=np.float64)
    got = roundtrip(arr, tmp_path / "a.npy")
    assert got.shape == (1,)
    assert got.dtype == np.float64
    assert got[0] == 0.0


def test_header_is_64_byte_aligned_and_payload_follows(tmp_path):
    path = tmp_path / "a.npy"
    write_array(np.array([0.5, 0.5], dtype=np.float32), path)
    blob = path.read_bytes()
    assert blob[:6] == b"\x93NUMPY"
    assert blob[6:8] == b"\x01\x00"
    (hlen,) = struct.unpack("<H", blob[8:10])
    assert (10 + hlen) % 64 == 0
    assert 10 + hlen == 128  # this header spills past one 64-byte block
    assert blob[10 + hlen - 1:10 + hlen] == b"\n"
    assert len(blob) == 10 + hlen + 8  # two float32 values


def test_writes_are_deterministic(tmp_path):
    arr = np.linspace(0, 1, 12, dtype=np.float64).reshape(3, 4)
    write_array(arr, tmp_path / "a.npy")
    write_array(arr, tmp_path / "b.npy")
    assert (tmp_path / "a.npy").read_bytes() == (tmp_path / "b.npy").read_bytes()


def test_interoperates_with_numpy_reader(tmp_path):
    arr = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    path = tmp_path / "a.npy"
    write_array(arr, path)
    via_numpy = np.load(path)
    assert via_numpy.dtype == arr.dtype
    assert np.array_equal(via_numpy, arr)
    # and the other way around: np.save output is readable
    np.save(tmp_path / "b.npy", arr)
    assert np.array_equal(read_array(tmp_path / "b.npy"), arr)


@settings(max_examples=150, deadline=None)
@given(
    shape=st.lists(st.integers(1, 6), min_size=1, max_size=4),
    dtype=st.sampled_from([np.float32, np.float64]),
    data=st.data(),
)
def test_roundtrip_property(tmp_path_factory, shape, dtype, data):
    n = int(np.prod(shape))
    values = data.draw(st.lists(
        st.floats(allow_nan=True, allow_infinity=True, width=32),
        min_size=n, max_size=n,
    ))
    arr = np.array(values, dtype=dtype).reshape(shape)
    path = tmp_path_factory.mktemp("rt") / "a.npy"
    got = roundtrip(arr, path)
    assert got.dtype == arr.dtype and got.shape == arr.shape
    assert got.tobytes() == arr.tobytes()


def test_write_rejects_bad_rank_and_dtype(tmp_path):
    with pytest.raises(ValidationError):
        write_array(np.zeros((2, 2, 2, 2, 2)), tmp_path / "a.npy")
    with pytest.raises(ValidationError):
        write_array(np.zeros(3, dtype=np.int32), tmp_path / "a.npy")
    with pytest.raises(ValidationError):
        write_array(np.zeros((0, 2)), tmp_path / "a.npy")


def test_read_bad_magic_reports_offset_zero(tmp_path):
    path = tmp_path / "a.npy"
    write_array(np.ones(2), path)
    blob = bytearray(path.read_bytes())
    blob[0] = 0x00
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError) as err:
        read_array(path)
    assert err.value.offset == 0
    assert "byte offset 0" in str(err.value)


def test_read_bad_version_reports_offset_six(tmp_path):
    path = tmp_path / "a.npy"
    write_array(np.ones(2), path)
    blob = bytearray(path.read_bytes())
    blob[6] = 0x02
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError) as err:
        read_array(path)
    assert err.value.offset == 6


def test_read_unsupported_dtype(tmp_path):
    path = tmp_path / "a.npy"
    np.save(path, np.zeros(3, dtype=np.int32))
    with pytest.raises(UnsupportedDtypeError):
        read_array(str(path))


def test_read_truncated_payload(tmp_path):
    path = tmp_path / "a.npy"
    write_array(np.ones(4), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(LengthMismatchError):
        read_array(path)


def test_read_trailing_garbage(tmp_path):
    path = tmp_path / "a.npy"
    write_array(np.ones(4), path)
    path.write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(LengthMismatchError):
        read_array(path)


def test_read_fortran_order_rejected(tmp_path):
    path = tmp_path / "a.npy"
    np.save(path, np.asfortranarray(np.zeros((3, 2))))
    with pytest.raises(FormatError):
        read_array(path)


def test_read_missing_file(tmp_path):
    with pytest.raises(OSError):
        read_array(tmp_path / "nope.npy")


# ---- config ----

def write_json(tmp_path, obj):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(obj))
    return path


def test_config_defaults():
    cfg = RefineConfig()
    assert cfg.alpha == 1.0
    assert cfg.lam == 0.1
    assert cfg.delta == 0.3
    assert cfg.gamma == 2
    assert cfg.tau_percentile == 80.0
    assert cfg.solver == "auto"
    assert cfg.cg_tol == 1e-8
    assert cfg.cg_max_iter is None
    assert cfg.lambda_floor == 1e-8
    assert not cfg.ablation_uniform_weights
    assert not cfg.ablation_no_symmetrize


def test_config_partial_file_fills_defaults(tmp_path):
    cfg = load_config(write_json(tmp_path, {"alpha": 1.0, "lambda": 0.1,
                                            "delta": 0.3, "gamma": 2}))
    assert cfg == RefineConfig()


def test_config_empty_file_is_all_defaults(tmp_path):
    assert load_config(write_json(tmp_path, {})) == RefineConfig()


def test_config_negative_lambda_names_field(tmp_path):
    with pytest.raises(ValidationError, match="lambda must be >= 0"):
        load_config(write_json(tmp_path, {"lambda": -1}))


def test_config_unknown_key_warns_not_fails(tmp_path):
    with pytest.warns(UserWarning, match="pipeline_note"):
        cfg = load_config(write_json(tmp_path, {"pipeline_note": "x", "alpha": 2.0}))
    assert cfg.alpha == 2.0


@pytest.mark.parametrize("field,value", [
    ("alpha", 0), ("alpha", -1.0),
    ("lambda", -0.5),
    ("delta", -0.1), ("delta", 1.5),
    ("gamma", 0), ("gamma", -2), ("gamma", 1.5),
    ("tau_percentile", -1), ("tau_percentile", 100.5),
    ("solver", "lu"),
    ("cg_tol", 0.0), ("cg_tol", -1e-9),
    ("cg_max_iter", 0),
    ("lambda_floor", 0.0), ("lambda_floor", 2.0),
    ("ablation_uniform_weights", "yes"),
])
def test_config_rejects_out_of_range(tmp_path, field, value):
    with pytest.raises(ValidationError, match=field):
        load_config(write_json(tmp_path, {field: value}))


def test_config_roundtrips_through_dict():
    cfg = RefineConfig(alpha=3.0, lam=2.5, solver="cg", cg_max_iter=77)
    again = RefineConfig.from_mapping(cfg.to_dict())
    assert again == cfg
    assert "lambda" in cfg.to_dict()
    assert "lam" not in cfg.to_dict()


def test_config_solver_resolution():
    cfg = RefineConfig()
    assert cfg.resolve_solver(4096) == "dense"
    assert cfg.resolve_solver(4097) == "cg"
    assert RefineConfig(solver="cg").resolve_solver(4) == "cg"
    assert cfg.resolve_cg_max_iter(100) == 1000
    assert RefineConfig(cg_max_iter=7).resolve_cg_max_iter(100) == 7


def test_config_invalid_json_is_format_error(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(FormatError):
        load_config(path)
