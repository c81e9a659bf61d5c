import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from navhist.core import Position
from navhist.posenc import (
    AffineFusion,
    PosEncConfig,
    encode_2d,
    encode_axis,
    frequencies,
    fuse_position,
    position_enhanced,
)


@pytest.mark.parametrize("c", [4, 8, 12, 512, 1024])
def test_first_frequency_is_one(c):
    assert frequencies(PosEncConfig(c))[0] == 1.0


def test_second_frequency_c8():
    # d = 4: exp(-2 ln 1e4 / 4) = 1e-2
    assert abs(frequencies(PosEncConfig(8))[1] - 0.01) < 1e-12


def test_frequencies_strictly_decreasing():
    om = frequencies(PosEncConfig(512))
    assert len(om) == 128
    assert np.all(np.diff(om) < 0)


def test_frequencies_direct_evaluation():
    cfg = PosEncConfig(16, base=100.0)
    d = 8
    expected = [math.exp(-2 * k * math.log(100.0) / d) for k in range(d // 2)]
    np.testing.assert_allclose(frequencies(cfg), expected, rtol=1e-15)


@pytest.mark.parametrize("c", [2, 6, 0, -4])
def test_invalid_dims(c):
    with pytest.raises(ValueError):
        PosEncConfig(c)


def test_axis_zero():
    assert encode_axis(0.0, PosEncConfig(16)).tolist() == [0.0, 1.0] * 4


def test_axis_one_d2():
    # c = 4 gives d = 2, a single frequency of 1
    out = encode_axis(1.0, PosEncConfig(4))
    np.testing.assert_allclose(out, [0.84147098, 0.54030231], atol=1e-8)


def test_encode_2d_origin():
    assert encode_2d(0.0, 0.0, PosEncConfig(4)).tolist() == [0.0, 1.0, 0.0, 1.0]


def test_encode_2d_values():
    out = encode_2d(1.0, 2.0, PosEncConfig(4))
    np.testing.assert_allclose(out, [math.sin(1), math.cos(1), math.sin(2), math.cos(2)], rtol=0, atol=1e-15)
    np.testing.assert_allclose(out, [0.84147, 0.54030, 0.90930, -0.41615], atol=1e-5)


def test_encode_2d_interleaving_c8():
    cfg = PosEncConfig(8)
    out = encode_2d(3.0, -1.5, cfg)
    om = [1.0, 0.01]
    expected = [math.sin(3 * om[0]), math.cos(3 * om[0]), math.sin(3 * om[1]), math.cos(3 * om[1]),
                math.sin(-1.5 * om[0]), math.cos(-1.5 * om[0]), math.sin(-1.5 * om[1]), math.cos(-1.5 * om[1])]
    np.testing.assert_allclose(out, expected, atol=1e-14)


@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(-100, 100))
def test_axis_separation(a, b, c):
    cfg = PosEncConfig(8)
    assert np.array_equal(encode_2d(a, b, cfg)[:4], encode_2d(a, c, cfg)[:4])


@given(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.sampled_from([4, 8, 64, 256]))
def test_bounded(x, y, c):
    out = encode_2d(x, y, PosEncConfig(c))
    assert out.shape == (c,)
    assert np.all(np.abs(out) <= 1.0)


@settings(max_examples=200)
@given(st.floats(-50, 50), st.floats(-50, 50), st.sampled_from([4, 8, 32, 128]), st.data())
def test_shift_is_rotation(v, delta, c, data):
    cfg = PosEncConfig(c)
    om = frequencies(cfg)
    k = data.draw(st.integers(0, len(om) - 1))
    a = encode_axis(v, cfg)[2 * k : 2 * k + 2]
    b = encode_axis(v + delta, cfg)[2 * k : 2 * k + 2]
    ang = delta * om[k]
    rot = np.array([[math.cos(ang), math.sin(ang)], [-math.sin(ang), math.cos(ang)]])
    np.testing.assert_allclose(b, rot @ a, atol=1e-9)


def test_fuse_additive_inverse():
    cfg = PosEncConfig(8)
    pe = encode_2d(0.7, -0.3, cfg)
    out = fuse_position(-pe, Position(0.7, -0.3, 12.0), cfg)
    np.testing.assert_array_equal(out, np.zeros(8))


def test_fuse_zero_feature_origin():
    out = fuse_position(np.zeros(4), Position(0, 0, 0), PosEncConfig(4), AffineFusion.identity(4))
    assert out.tolist() == [0.0, 1.0, 0.0, 1.0]


def test_fuse_zero_weight_returns_bias():
    bias = np.array([1.0, -2.0, 3.0, 0.5])
    fusion = AffineFusion(np.zeros((4, 4)), bias)
    out = fuse_position(np.array([9.0, 9, 9, 9]), Position(4, 5, 6), PosEncConfig(4), fusion)
    np.testing.assert_array_equal(out, bias)


def test_fuse_ignores_z():
    cfg = PosEncConfig(8)
    f = np.arange(8.0)
    assert np.array_equal(fuse_position(f, Position(1, 2, 0), cfg), fuse_position(f, Position(1, 2, 99), cfg))


def test_fuse_dimension_mismatch():
    with pytest.raises(ValueError):
        fuse_position(np.zeros(6), Position(0, 0, 0), PosEncConfig(8))
    with pytest.raises(ValueError):
        fuse_position(np.zeros(8), Position(0, 0, 0), PosEncConfig(8), AffineFusion.identity(4))


def test_affine_validation():
    with pytest.raises(ValueError):
        AffineFusion(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        AffineFusion(np.eye(2), np.zeros(3))


def test_position_enhanced_rows():
    cfg = PosEncConfig(4)
    feats = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
    rel = np.array([[0, 0, 0], [1.0, 2.0, 0]])
    out = position_enhanced(feats, rel, cfg)
    np.testing.assert_allclose(out[0], [1, 1, 0, 1])
    np.testing.assert_allclose(out[1], feats[1] + encode_2d(1.0, 2.0, cfg))
