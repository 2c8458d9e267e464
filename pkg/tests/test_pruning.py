import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casarefine.errors import ShapeError, ValidationError
from casarefine.pruning import (
    apply_threshold,
    interpolate,
    percentile_threshold,
    prune,
)


def sort_and_cut_oracle(y, percentile):
    """Kept index set via explicit sorting and interpolated cut, no numpy."""
    mags = sorted(abs(v) for v in y)
    d = len(mags)
    if d == 1:
        tau = mags[0]
    else:
        pos = percentile / 100.0 * (d - 1)
        lo = int(pos)
        frac = pos - lo
        hi = min(lo + 1, d - 1)
        tau = mags[lo] + frac * (mags[hi] - mags[lo])
    return {i for i, v in enumerate(y) if abs(v) >= tau}


# ---- prune ----

def test_prune_median_example():
    y = np.array([0.5, -0.1, 0.05, -0.9])
    got = prune(y, 50)
    assert np.array_equal(got, [0.5, 0.0, 0.0, -0.9])


def test_prune_percentile_zero_keeps_everything():
    rng = np.random.default_rng(0)
    y = rng.standard_normal(32)
    assert np.array_equal(prune(y, 0), y)


def test_prune_kept_entries_are_bit_identical():
    rng = np.random.default_rng(1)
    y = rng.standard_normal(64)
    out = prune(y, 80)
    kept = out != 0
    assert np.array_equal(out[kept], y[kept])
    assert out[kept].tobytes() == y[kept].tobytes()


def test_prune_matches_sort_and_cut_oracle():
    rng = np.random.default_rng(2)
    for _ in range(50):
        y = rng.standard_normal(int(rng.integers(1, 40)))
        p = float(rng.uniform(0, 100))
        got = {i for i, v in enumerate(prune(y, p)) if v != 0}
        want = sort_and_cut_oracle(y.tolist(), p)
        # zero entries of y keep no information either way
        nz = {i for i in range(y.size) if y[i] != 0}
        assert got & nz == want & nz


def test_prune_nonzero_input_keeps_at_least_one():
    rng = np.random.default_rng(3)
    for p in (0, 25, 50, 80, 95, 100):
        y = rng.standard_normal(16)
        assert np.count_nonzero(prune(y, p)) >= 1


def test_prune_percentile_100_keeps_ties_at_max():
    y = np.array([0.5, -0.5, 0.1])
    got = prune(y, 100)
    assert np.array_equal(got, [0.5, -0.5, 0.0])


@settings(max_examples=120, deadline=None)
@given(
    values=st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=40),
    p1=st.floats(0, 100),
    p2=st.floats(0, 100),
)
def test_prune_support_monotone(values, p1, p2):
    y = np.array(values)
    lo, hi = min(p1, p2), max(p1, p2)
    sup_hi = set(np.flatnonzero(prune(y, hi)))
    sup_lo = set(np.flatnonzero(prune(y, lo)))
    assert sup_hi <= sup_lo


def test_apply_threshold_idempotent_with_same_tau():
    rng = np.random.default_rng(4)
    y = rng.standard_normal(50)
    tau = percentile_threshold(y, 70)
    once = apply_threshold(y, tau)
    again = apply_threshold(once, tau)
    assert np.array_equal(once, again)


def test_prune_rejects_bad_percentile():
    with pytest.raises(ValidationError):
        prune(np.ones(3), -1)
    with pytest.raises(ValidationError):
        prune(np.ones(3), 100.5)


def test_prune_rejects_non_vector():
    with pytest.raises(ShapeError):
        prune(np.ones((2, 2)), 50)
    with pytest.raises(ShapeError):
        prune(np.array([]), 50)


# ---- interpolate ----

def test_interpolate_zero_offset_returns_image_embedding():
    rng = np.random.default_rng(5)
    img = rng.standard_normal(24)
    txt = rng.standard_normal(24)
    got = interpolate(img, txt, txt.copy(), tau_percentile=80)
    assert got.tobytes() == img.tobytes()


def test_interpolate_percentile_zero_recovers_plain_sum():
    rng = np.random.default_rng(6)
    img, src, tgt = (rng.standard_normal(16) for _ in range(3))
    got = interpolate(img, src, tgt, tau_percentile=0)
    assert np.array_equal(got, img + (src - tgt))


def test_interpolate_reversed_sign_flips_difference():
    rng = np.random.default_rng(7)
    img, src, tgt = (rng.standard_normal(16) for _ in range(3))
    fwd = interpolate(img, src, tgt, tau_percentile=0, sign="paper")
    rev = interpolate(img, src, tgt, tau_percentile=0, sign="reversed")
    assert np.allclose(fwd - img, -(rev - img))


def test_interpolate_matches_compose_oracle():
    rng = np.random.default_rng(8)
    for _ in range(20):
        d = int(rng.integers(2, 30))
        img, src, tgt = (rng.standard_normal(d) for _ in range(3))
        got = interpolate(img, src, tgt, tau_percentile=80)
        diff = src - tgt
        keep = sort_and_cut_oracle(diff.tolist(), 80)
        want = img.copy()
        for i in keep:
            want[i] = img[i] + diff[i]
        assert np.max(np.abs(got - want)) < 1e-15


def test_interpolate_dimension_mismatch():
    with pytest.raises(ShapeError):
        interpolate(np.ones(3), np.ones(3), np.ones(4))


def test_interpolate_bad_sign():
    with pytest.raises(ValidationError):
        interpolate(np.ones(3), np.ones(3), np.ones(3), sign="up")
