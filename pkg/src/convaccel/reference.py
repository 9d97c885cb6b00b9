"""Golden reference model.

Straightforward loop implementations of valid convolution and its per-window
decompositions, plus the pooling, activation and fully connected layers used by
the demo network.  Every simulator result is checked against these.

Accumulation is exact in ``int64`` (Q.16) and each output element is narrowed to
Q8.8 exactly once.
"""
from __future__ import annotations

import enum

import numpy as np

from .errors import ShapeError
from .fixedpoint import FRAC_BITS, Fixed16, narrow_array, widen_array
from .tensors import FeatureMap, KernelSet, geometry_for, output_dims


class Activation(str, enum.Enum):
    RELU = "relu"
    IDENTITY = "identity"


class PoolMode(str, enum.Enum):
    MAX = "max"
    AVG = "avg"


def _bias_raw(b) -> int:
    return b.raw if isinstance(b, Fixed16) else int(b)


def _window(x: FeatureMap, k: KernelSet, row: int, col: int) -> np.ndarray:
    Hk, Wk = k.kernel_height, k.kernel_width
    if x.channels != k.channels:
        raise ShapeError(f"input has {x.channels} channels, kernels expect {k.channels}")
    if row < 0 or col < 0 or row + Hk > x.height or col + Wk > x.width:
        raise ShapeError(f"window at ({row}, {col}) of size {Hk}x{Wk} leaves the "
                         f"{x.height}x{x.width} plane")
    return x.data[:, row:row + Hk, col:col + Wk]


def conv_window(x: FeatureMap, k: KernelSet, row: int = 0, col: int = 0) -> np.ndarray:
    """All ``M`` outputs (with bias, not narrowed) of the window anchored at (row, col)."""
    win = _window(x, k, row, col).astype(np.int64)
    w = k.weights.astype(np.int64)
    acc = (w * win[None]).sum(axis=(1, 2, 3))
    return acc + widen_array(k.bias)


def conv_window_topleft(x: FeatureMap, k: KernelSet) -> np.ndarray:
    return conv_window(x, k, 0, 0)


def conv_reference(x: FeatureMap, k: KernelSet, Hs: int = 1, Ws: int = 1) -> FeatureMap:
    geom = geometry_for(x, k, Hs, Ws)
    acc = np.empty((k.kernels, geom.out_height, geom.out_width), dtype=np.int64)
    for i in range(geom.out_height):
        for j in range(geom.out_width):
            acc[:, i, j] = conv_window(x, k, i * Hs, j * Ws)
    return FeatureMap(narrow_array(acc))


def partial_sum(x_channel, k_channel) -> int:
    """Exact inner product of one window channel with one kernel channel."""
    xc = np.asarray(x_channel)
    kc = np.asarray(k_channel)
    if xc.shape != kc.shape:
        raise ShapeError(f"window channel {xc.shape} vs kernel channel {kc.shape}")
    return sum(int(a) * int(b) for a, b in zip(xc.ravel(), kc.ravel()))


def sum_over_input_channels(a, b_m) -> int:
    """Sum the N per-channel partial sums of one output and add its bias."""
    a = list(a)
    if not a:
        raise ShapeError("need at least one input channel")
    total = 0
    for v in a:
        total += int(v)
    return total + (_bias_raw(b_m) << FRAC_BITS)


def window_by_channel_sums(x: FeatureMap, k: KernelSet, row: int = 0, col: int = 0) -> np.ndarray:
    """Per output m: compute a_m1..a_mN, then sum them and add the bias."""
    win = _window(x, k, row, col)
    out = np.empty(k.kernels, dtype=np.int64)
    for m in range(k.kernels):
        parts = [partial_sum(win[n], k.weights[m, n]) for n in range(k.channels)]
        out[m] = sum_over_input_channels(parts, int(k.bias[m]))
    return out


def accumulate_output_components(x: FeatureMap, k: KernelSet, row: int = 0, col: int = 0) -> np.ndarray:
    """Per input channel n: add the M-vector (a_1n..a_Mn) into M accumulators; bias last."""
    win = _window(x, k, row, col)
    acc = [0] * k.kernels
    for n in range(k.channels):
        component = [partial_sum(win[n], k.weights[m, n]) for m in range(k.kernels)]
        acc = [r + c for r, c in zip(acc, component)]
    acc = [r + (int(b) << FRAC_BITS) for r, b in zip(acc, k.bias)]
    return np.array(acc, dtype=np.int64)


def pool(x: FeatureMap, size: int, stride: int, mode: PoolMode = PoolMode.MAX) -> FeatureMap:
    Ho, Wo = output_dims(x.height, x.width, size, size, stride, stride)
    data = x.data.astype(np.int64)
    out = np.empty((x.channels, Ho, Wo), dtype=np.int64)
    mode = PoolMode(mode)
    area = size * size
    for i in range(Ho):
        for j in range(Wo):
            patch = data[:, i * stride:i * stride + size, j * stride:j * stride + size]
            if mode is PoolMode.MAX:
                out[:, i, j] = patch.max(axis=(1, 2))
            else:
                s = patch.sum(axis=(1, 2))
                q, r = np.divmod(s, area)
                # round half to even
                q += (2 * r > area) | ((2 * r == area) & (q % 2 == 1))
                out[:, i, j] = q
    return FeatureMap(out.astype(np.int16))


def pool_max(x: FeatureMap, size: int, stride: int) -> FeatureMap:
    return pool(x, size, stride, PoolMode.MAX)


def activation(x: FeatureMap, kind: Activation = Activation.RELU) -> FeatureMap:
    kind = Activation(kind)
    if kind is Activation.IDENTITY:
        return x
    return FeatureMap(np.maximum(x.data, 0))


def fully_connected(x, weights, bias) -> np.ndarray:
    """Dense layer on the channel-major flattening of ``x``; returns raw Q8.8 words."""
    v = (x.data if isinstance(x, FeatureMap) else np.asarray(x)).reshape(-1).astype(np.int64)
    w = np.asarray(weights)
    b = np.asarray(bias)
    if w.ndim != 2 or w.shape[1] != v.shape[0]:
        raise ShapeError(f"weights {w.shape} do not accept a {v.shape[0]}-vector")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"bias {b.shape} does not match {w.shape[0]} outputs")
    acc = w.astype(np.int64) @ v + widen_array(b)
    return narrow_array(acc)
