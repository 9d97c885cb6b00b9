"""Feature maps, kernel sets, output geometry and the CT16 tensor file format.

Layouts follow the accelerator's streaming order: a feature map is ``[N, H, W]``
channel-major then row-major, a kernel set is ``[M, N, Hk, Wk]`` plus an
``M``-long bias.  All values are raw Q8.8 words (``int16``).  Indices are 0-based
everywhere in this package.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (DimensionError, GeometryError, MalformedHeaderError,
                     MissingFileError, TensorFormatError, TruncatedPayloadError)
from .fixedpoint import quantize_array, to_real_array

MAGIC = b"CT16"
MAX_ELEMENTS = 1 << 31


def _frozen_int16(data, ndim: int, what: str) -> np.ndarray:
    arr = np.asarray(data)
    if arr.ndim != ndim:
        raise ValueError(f"{what} must be {ndim}-D, got shape {arr.shape}")
    if arr.dtype != np.int16:
        if not np.issubdtype(arr.dtype, np.integer):
            raise TypeError(f"{what} must hold raw integer words, got {arr.dtype}")
        if arr.size and (arr.min() < -32768 or arr.max() > 32767):
            raise ValueError(f"{what} has values outside the 16-bit range")
    arr = np.array(arr, dtype=np.int16, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FeatureMap:
    data: np.ndarray

    def __post_init__(self):
        data = _frozen_int16(self.data, 3, "feature map")
        if min(data.shape) < 1:
            raise DimensionError(f"feature map dimensions must be >= 1, got {data.shape}")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_real(cls, values) -> "FeatureMap":
        return cls(quantize_array(values))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    def to_real(self) -> np.ndarray:
        return to_real_array(self.data)

    def __eq__(self, other):
        return isinstance(other, FeatureMap) and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class KernelSet:
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = _frozen_int16(self.weights, 4, "kernel weights")
        b = _frozen_int16(self.bias, 1, "bias")
        if min(w.shape) < 1:
            raise DimensionError(f"kernel dimensions must be >= 1, got {w.shape}")
        if b.shape[0] != w.shape[0]:
            raise DimensionError(f"bias length {b.shape[0]} != kernel count {w.shape[0]}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @classmethod
    def from_real(cls, weights, bias) -> "KernelSet":
        return cls(quantize_array(weights), quantize_array(bias))

    @property
    def kernels(self) -> int:
        return self.weights.shape[0]

    @property
    def channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_height(self) -> int:
        return self.weights.shape[2]

    @property
    def kernel_width(self) -> int:
        return self.weights.shape[3]

    @property
    def parameter_count(self) -> int:
        return self.weights.size + self.bias.size

    def __eq__(self, other):
        return (isinstance(other, KernelSet)
                and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.bias, other.bias))


@dataclass(frozen=True)
class ConvGeometry:
    """Valid (unpadded) convolution geometry for one layer."""
    height: int
    width: int
    kernel_height: int
    kernel_width: int
    stride_h: int
    stride_w: int
    out_height: int
    out_width: int

    @property
    def window_count(self) -> int:
        return window_count(self)


def output_dims(H: int, W: int, Hk: int, Wk: int, Hs: int = 1, Ws: int = 1):
    """Output height and width of a valid convolution: ``(H-Hk)//Hs + 1``."""
    if min(H, W, Hk, Wk) < 1:
        raise GeometryError(f"dimensions must be positive: H={H} W={W} Hk={Hk} Wk={Wk}")
    if Hs < 1 or Ws < 1:
        raise GeometryError(f"strides must be >= 1, got ({Hs}, {Ws})")
    if Hk > H or Wk > W:
        raise GeometryError(f"kernel {Hk}x{Wk} larger than input {H}x{W}")
    return (H - Hk) // Hs + 1, (W - Wk) // Ws + 1


def conv_geometry(H, W, Hk, Wk, Hs=1, Ws=1) -> ConvGeometry:
    Ho, Wo = output_dims(H, W, Hk, Wk, Hs, Ws)
    return ConvGeometry(H, W, Hk, Wk, Hs, Ws, Ho, Wo)


def geometry_for(x: FeatureMap, k: KernelSet, Hs: int = 1, Ws: int = 1) -> ConvGeometry:
    if x.channels != k.channels:
        raise GeometryError(
            f"input has {x.channels} channels but kernels expect {k.channels}")
    return conv_geometry(x.height, x.width, k.kernel_height, k.kernel_width, Hs, Ws)


def window_count(geometry: ConvGeometry) -> int:
    return geometry.out_height * geometry.out_width


# -- CT16 file format ---------------------------------------------------------
#
#   "CT16" | u8 rank (3|4) | rank x u32 dims | [u32 bias length, rank 4 only]
#   | int16 payload | [int16 bias payload]
# All little-endian.

def _check_dims(dims):
    if any(d < 1 for d in dims):
        raise DimensionError(f"dimensions must be >= 1, got {tuple(dims)}")
    if any(d > 0xFFFFFFFF for d in dims):
        raise DimensionError(f"dimension exceeds u32: {tuple(dims)}")
    total = 1
    for d in dims:
        total *= d
    if total > MAX_ELEMENTS:
        raise DimensionError(f"element count {total} exceeds {MAX_ELEMENTS}")
    return total


def encode_tensor(x) -> bytes:
    if isinstance(x, FeatureMap):
        dims = x.data.shape
        _check_dims(dims)
        header = MAGIC + struct.pack("<B3I", 3, *dims)
        return header + x.data.astype("<i2").tobytes()
    if isinstance(x, KernelSet):
        dims = x.weights.shape
        _check_dims(dims)
        header = MAGIC + struct.pack("<B4II", 4, *dims, x.bias.shape[0])
        return header + x.weights.astype("<i2").tobytes() + x.bias.astype("<i2").tobytes()
    raise TypeError(f"cannot encode {type(x).__name__}")


def decode_tensor(buf: bytes):
    if len(buf) < 5 or buf[:4] != MAGIC:
        raise MalformedHeaderError("missing CT16 magic")
    rank = buf[4]
    if rank not in (3, 4):
        raise MalformedHeaderError(f"unsupported rank {rank}")
    header_len = 5 + 4 * rank + (4 if rank == 4 else 0)
    if len(buf) < header_len:
        raise MalformedHeaderError("header truncated")
    fields = struct.unpack_from(f"<{rank + (1 if rank == 4 else 0)}I", buf, 5)
    dims = fields[:rank]
    total = _check_dims(dims)
    bias_len = 0
    if rank == 4:
        bias_len = fields[4]
        if bias_len != dims[0]:
            raise DimensionError(f"bias length {bias_len} != kernel count {dims[0]}")
    need = header_len + 2 * (total + bias_len)
    if len(buf) < need:
        raise TruncatedPayloadError(f"payload needs {need} bytes, file has {len(buf)}")
    if len(buf) > need:
        raise TensorFormatError(f"{len(buf) - need} trailing bytes after payload")
    payload = np.frombuffer(buf, dtype="<i2", count=total, offset=header_len)
    if rank == 3:
        return FeatureMap(payload.reshape(dims))
    bias = np.frombuffer(buf, dtype="<i2", count=bias_len, offset=header_len + 2 * total)
    return KernelSet(payload.reshape(dims), bias)


def save_tensor(x, path) -> None:
    Path(path).write_bytes(encode_tensor(x))


def load_tensor(path):
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"tensor file not found: {path}")
    return decode_tensor(path.read_bytes())
