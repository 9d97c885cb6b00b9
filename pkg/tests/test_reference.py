import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convaccel import reference as ref
from convaccel.errors import GeometryError, ShapeError
from convaccel.fixedpoint import quantize_array
from convaccel.reference import Activation, PoolMode
from convaccel.tensors import FeatureMap, KernelSet
from conftest import random_feature_map, random_kernels
from oracles import conv_oracle, dot_oracle, fold_oracle


def test_identity_conv():
    x = FeatureMap.from_real([[[1.0]]])
    k = KernelSet.from_real([[[[1.0]]]], [0.0])
    assert ref.conv_reference(x, k).to_real().tolist() == [[[1.0]]]


def test_worked_example_all_ones():
    x = FeatureMap.from_real(np.ones((1, 5, 5)))
    k = KernelSet.from_real(np.ones((1, 1, 3, 3)), [0.0])
    out = ref.conv_reference(x, k, 2, 2)
    assert out.shape == (1, 2, 2)
    assert np.all(out.to_real() == 9.0)


def _oracle(x, k, Hs=1, Ws=1):
    return np.array(conv_oracle(x.data.tolist(), k.weights.tolist(), k.bias.tolist(), Hs, Ws))


def test_random_conv_matches_bigint_oracle(rng):
    x = random_feature_map(rng, (3, 8, 8))
    k = random_kernels(rng, 4, 3, 3)
    assert np.array_equal(ref.conv_reference(x, k).data, _oracle(x, k))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 4), st.integers(1, 3),
       st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_conv_property_vs_oracle(N, M, K, Hs, Ws, seed):
    rng = np.random.default_rng(seed)
    x = random_feature_map(rng, (N, K + rng.integers(0, 5), K + rng.integers(0, 5)), -32768, 32768)
    k = random_kernels(rng, M, N, K, lo=-32768, hi=32768)
    assert np.array_equal(ref.conv_reference(x, k, Hs, Ws).data, _oracle(x, k, Hs, Ws))


def test_conv_geometry_errors(rng):
    with pytest.raises(GeometryError):
        ref.conv_reference(random_feature_map(rng, (1, 2, 2)), random_kernels(rng, 1, 1, 3))
    with pytest.raises(GeometryError):
        ref.conv_reference(random_feature_map(rng, (2, 4, 4)), random_kernels(rng, 1, 1, 3))


def test_topleft_window_is_first_output(rng):
    x = random_feature_map(rng, (3, 6, 7))
    k = random_kernels(rng, 5, 3, 3)
    top = ref.conv_window_topleft(x, k)
    full = ref.conv_reference(x, k)
    from convaccel.fixedpoint import narrow_array
    assert np.array_equal(narrow_array(top), full.data[:, 0, 0])
    # brute-force slice of the convolution sum, unnarrowed
    expect = [sum(int(x.data[n, i, j]) * int(k.weights[m, n, i, j])
                  for n in range(3) for i in range(3) for j in range(3)) + int(k.bias[m]) * 256
              for m in range(5)]
    assert top.tolist() == expect


def test_zero_weights_pass_bias(rng):
    x = random_feature_map(rng, (2, 4, 4))
    k = KernelSet(np.zeros((3, 2, 2, 2), dtype=np.int16), np.array([5, -7, 0], dtype=np.int16))
    assert ref.conv_window_topleft(x, k).tolist() == [5 * 256, -7 * 256, 0]


def test_partial_sum():
    assert ref.partial_sum(quantize_array([[2.0]]), quantize_array([[0.5]])) == 1 << 16
    assert ref.partial_sum(np.ones((3, 3), np.int16), np.zeros((3, 3), np.int16)) == 0
    with pytest.raises(ShapeError):
        ref.partial_sum(np.ones((3, 3)), np.ones((2, 2)))


def test_partial_sum_random_6x6(rng):
    a = rng.integers(-32768, 32768, (6, 6)).astype(np.int16)
    b = rng.integers(-32768, 32768, (6, 6)).astype(np.int16)
    assert ref.partial_sum(a, b) == dot_oracle(a.ravel().tolist(), b.ravel().tolist())


def test_sum_over_input_channels(rng):
    assert ref.sum_over_input_channels([0], 256) == 1 << 16
    a = rng.integers(-(1 << 39), 1 << 39, 15).tolist()
    b = int(rng.integers(-32768, 32768))
    expect = fold_oracle(a) + b * 256
    assert ref.sum_over_input_channels(a, b) == expect
    assert ref.sum_over_input_channels(a[::-1], b) == expect
    with pytest.raises(ShapeError):
        ref.sum_over_input_channels([], 0)


def test_accumulate_single_component_is_topleft(rng):
    x = random_feature_map(rng, (1, 5, 5))
    k = random_kernels(rng, 4, 1, 3)
    assert np.array_equal(ref.accumulate_output_components(x, k), ref.conv_window_topleft(x, k))


def test_accumulate_zero_input_gives_bias(rng):
    x = FeatureMap(np.zeros((3, 4, 4), dtype=np.int16))
    k = random_kernels(rng, 6, 3, 3)
    assert ref.accumulate_output_components(x, k).tolist() == [int(b) * 256 for b in k.bias]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_three_methods_agree(N, M, K, seed):
    rng = np.random.default_rng(seed)
    x = random_feature_map(rng, (N, K + 2, K + 3), -32768, 32768)
    k = random_kernels(rng, M, N, K, lo=-32768, hi=32768)
    r, c = int(rng.integers(0, 3)), int(rng.integers(0, 4))
    a = ref.conv_window(x, k, r, c)
    assert np.array_equal(a, ref.window_by_channel_sums(x, k, r, c))
    assert np.array_equal(a, ref.accumulate_output_components(x, k, r, c))


def test_linearity_before_narrowing(rng):
    x1 = random_feature_map(rng, (2, 5, 5), -256, 256)
    x2 = random_feature_map(rng, (2, 5, 5), -256, 256)
    k = random_kernels(rng, 3, 2, 3)
    k0 = KernelSet(k.weights, np.zeros(3, dtype=np.int16))
    xs = FeatureMap(x1.data + x2.data)
    assert np.array_equal(ref.conv_window(xs, k0, 1, 1),
                          ref.conv_window(x1, k0, 1, 1) + ref.conv_window(x2, k0, 1, 1))


def test_unit_kernel_is_identity(rng):
    x = random_feature_map(rng, (1, 6, 4))
    k = KernelSet(np.full((1, 1, 1, 1), 256, np.int16), np.zeros(1, np.int16))
    assert ref.conv_reference(x, k) == x


def test_pool_max():
    x = FeatureMap.from_real([[[1, 2], [3, 4]]])
    assert ref.pool_max(x, 2, 2).to_real().tolist() == [[[4.0]]]
    c = FeatureMap.from_real(np.full((2, 6, 6), 1.25))
    assert np.all(ref.pool_max(c, 2, 2).to_real() == 1.25)


def test_pool_max_random(rng):
    x = random_feature_map(rng, (3, 6, 6))
    got = ref.pool_max(x, 2, 2).data
    for n in range(3):
        for i in range(3):
            for j in range(3):
                assert got[n, i, j] == max(int(x.data[n, 2 * i + a, 2 * j + b])
                                           for a in range(2) for b in range(2))


def test_pool_avg_rounds_half_even():
    x = FeatureMap(np.array([[[1, 0], [0, 1]], [[1, 1], [0, 0]], [[3, 0], [0, 0]]], dtype=np.int16))
    # sums 2, 2, 3 over 4 cells -> 0.5 -> 0, 0.5 -> 0, 0.75 -> 1
    assert ref.pool(x, 2, 2, PoolMode.AVG).data.ravel().tolist() == [0, 0, 1]
    x = FeatureMap(np.array([[[6, 0], [0, 0]]], dtype=np.int16))
    assert ref.pool(x, 2, 2, PoolMode.AVG).data.ravel().tolist() == [2]   # 1.5 -> 2


def test_pool_geometry_error(rng):
    with pytest.raises(GeometryError):
        ref.pool_max(random_feature_map(rng, (1, 1, 3)), 2, 2)


def test_activation(rng):
    x = FeatureMap.from_real([[[-1.0, 2.5]]])
    assert ref.activation(x).to_real().tolist() == [[[0.0, 2.5]]]
    y = random_feature_map(rng, (2, 5, 5))
    out = ref.activation(y).data
    assert np.array_equal(out, np.where(y.data >= 0, y.data, 0))
    assert ref.activation(y, Activation.IDENTITY) == y


def test_fully_connected(rng):
    assert ref.fully_connected(np.array([77], np.int16), [[256]], [0]).tolist() == [77]
    v = rng.integers(-512, 512, 320).astype(np.int16)
    assert ref.fully_connected(v, np.zeros((10, 320), np.int16),
                               np.arange(10, dtype=np.int16)).tolist() == list(range(10))
    w = rng.integers(-32768, 32768, (10, 320)).astype(np.int16)
    b = rng.integers(-32768, 32768, 10).astype(np.int16)
    assert w.size + b.size == 3210
    from oracles import narrow_oracle
    expect = [narrow_oracle(dot_oracle(w[o].tolist(), v.tolist()) + int(b[o]) * 256) for o in range(10)]
    assert ref.fully_connected(v, w, b).tolist() == expect
    with pytest.raises(ShapeError):
        ref.fully_connected(v, w[:, :10], b)
