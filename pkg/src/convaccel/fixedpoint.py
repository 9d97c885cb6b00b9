"""16-bit fixed-point sample words and the wide accumulator used by the datapath.

Samples and weights are Q8.8 in a signed 16-bit word.  A product of two Q8.8
words is Q16.16; products and every partial sum live in an exact wide
accumulator, and a value is narrowed back to Q8.8 exactly once per output.

Scalars are wrapped in :class:`Fixed16` / :class:`Acc40`.  Tensors carry raw
integers in numpy arrays (``int16`` for samples, ``int64`` for accumulators);
the ``*_array`` helpers are the vectorised counterparts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FRAC_BITS = 8
WORD_BITS = 16
ONE = 1 << FRAC_BITS
RAW_MIN = -(1 << (WORD_BITS - 1))
RAW_MAX = (1 << (WORD_BITS - 1)) - 1

# Products carry 2*FRAC_BITS fractional bits.
ACC_FRAC_BITS = 2 * FRAC_BITS
# Storage width of the accumulator.  2**23 products of magnitude <= 2**30 need 54 bits.
ACC_BITS = 64
ACC_MIN = -(1 << (ACC_BITS - 1))
ACC_MAX = (1 << (ACC_BITS - 1)) - 1


def _saturate(raw: int) -> int:
    return RAW_MIN if raw < RAW_MIN else RAW_MAX if raw > RAW_MAX else raw


@dataclass(frozen=True, order=True)
class Fixed16:
    raw: int

    def __post_init__(self):
        if not RAW_MIN <= self.raw <= RAW_MAX:
            raise ValueError(f"raw value {self.raw} outside signed 16-bit range")

    def to_real(self) -> float:
        return self.raw / ONE

    def widen(self) -> "Acc40":
        """Exact conversion to the accumulator format (Q8.8 -> Q.16)."""
        return Acc40(self.raw << FRAC_BITS)

    def __repr__(self):
        return f"Fixed16({self.raw}={self.to_real()!r})"


@dataclass(frozen=True, order=True)
class Acc40:
    raw: int

    def __post_init__(self):
        if not ACC_MIN <= self.raw <= ACC_MAX:
            raise OverflowError(f"accumulator overflow: {self.raw}")

    def __add__(self, other: "Acc40") -> "Acc40":
        if not isinstance(other, Acc40):
            return NotImplemented
        return Acc40(self.raw + other.raw)

    def to_real(self) -> float:
        return self.raw / (1 << ACC_FRAC_BITS)

    @classmethod
    def from_real(cls, v: float) -> "Acc40":
        return cls(int(round(v * (1 << ACC_FRAC_BITS))))

    def __repr__(self):
        return f"Acc40({self.raw}={self.to_real()!r})"


def quantize(v: float) -> Fixed16:
    """Round ``v * 256`` to nearest (ties to even) and saturate to 16 bits."""
    if not np.isfinite(v):
        raise ValueError(f"cannot quantize non-finite value {v!r}")
    # Scaling by a power of two is exact in binary floating point; round() is
    # round-half-even.
    return Fixed16(_saturate(int(round(float(v) * ONE))))


def mul(a: Fixed16, b: Fixed16) -> Acc40:
    return Acc40(a.raw * b.raw)


def _round_shift(raw: int, shift: int) -> int:
    q, r = divmod(raw, 1 << shift)
    half = 1 << (shift - 1)
    if r > half or (r == half and q & 1):
        q += 1
    return q


def narrow(a: Acc40) -> Fixed16:
    """Shift right by 8 with round-half-even, saturating to Q8.8."""
    return Fixed16(_saturate(_round_shift(a.raw, ACC_FRAC_BITS - FRAC_BITS)))


# -- array forms --------------------------------------------------------------

def quantize_array(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot quantize non-finite values")
    return np.clip(np.rint(v * ONE), RAW_MIN, RAW_MAX).astype(np.int16)


def to_real_array(raw) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) / ONE


def widen_array(raw) -> np.ndarray:
    return np.asarray(raw, dtype=np.int64) << FRAC_BITS


def mul_array(a, b) -> np.ndarray:
    return np.asarray(a, dtype=np.int64) * np.asarray(b, dtype=np.int64)


def narrow_array(acc) -> np.ndarray:
    acc = np.asarray(acc, dtype=np.int64)
    shift = ACC_FRAC_BITS - FRAC_BITS
    q = acc >> shift
    r = acc & ((1 << shift) - 1)
    half = 1 << (shift - 1)
    q = q + ((r > half) | ((r == half) & ((q & 1) == 1)))
    return np.clip(q, RAW_MIN, RAW_MAX).astype(np.int16)
