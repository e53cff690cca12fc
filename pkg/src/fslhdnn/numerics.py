"""Tensor container, BF16 rounding, and fixed-point feature quantization.

Everything downstream (clustering, convolution, encoding, classification)
moves data through the `Tensor` type defined here. BF16 is emulated on top
of float32: a BF16 tensor simply holds float32 values that survive
`bf16_round` unchanged.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import NumericError, ValidationError

_BF16_QNAN = np.uint32(0x7FC00000).view(np.float32)


class DType(IntEnum):
    """Element types; the integer value doubles as the on-disk dtype code."""

    F32 = 0
    BF16 = 1
    I32 = 2
    I16 = 3
    U8 = 4
    U4PACKED = 5


_NUMPY_DTYPE = {
    DType.F32: np.float32,
    DType.BF16: np.float32,  # bf16 emulated in f32
    DType.I32: np.int32,
    DType.I16: np.int16,
    DType.U8: np.uint8,
    DType.U4PACKED: np.uint8,  # unpacked in memory, packed on disk
}


def bf16_round(x):
    """Round float32 value(s) to the nearest BF16-representable float32.

    Round-to-nearest-even on the low 16 mantissa bits. NaN maps to the
    canonical quiet NaN; infinities pass through.
    """
    arr = np.asarray(x, dtype=np.float32)
    u = arr.view(np.uint32)
    rounded = ((u.astype(np.uint64) + 0x7FFF + ((u >> 16) & 1)) & 0xFFFF0000).astype(
        np.uint32
    )
    out = rounded.view(np.float32)
    out = np.where(np.isnan(arr), _BF16_QNAN, out)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def is_bf16(x):
    """True where x is already exactly representable in BF16."""
    arr = np.asarray(x, dtype=np.float32)
    return np.array_equal(bf16_round(arr), arr, equal_nan=True)


@dataclass(frozen=True)
class Tensor:
    """Rank-<=4 row-major numeric array with an explicit dtype."""

    data: np.ndarray
    dtype: DType

    def __post_init__(self):
        if self.data.ndim < 1 or self.data.ndim > 4:
            raise ValidationError(f"tensor rank must be 1..4, got {self.data.ndim}")
        if any(d <= 0 for d in self.data.shape):
            raise ValidationError(f"dimensions must be positive, got {self.data.shape}")
        expected = _NUMPY_DTYPE[self.dtype]
        if self.data.dtype != expected:
            raise ValidationError(
                f"payload dtype {self.data.dtype} does not match {self.dtype.name}"
            )
        if self.dtype == DType.BF16 and not is_bf16(self.data):
            raise ValidationError("BF16 tensor holds values not representable in BF16")
        if self.dtype == DType.U4PACKED and (self.data.max(initial=0) > 15):
            raise ValidationError("U4 values must lie in [0, 15]")

    @property
    def shape(self):
        return self.data.shape


def tensor(data, dtype=DType.F32):
    """Build a Tensor from array-like data, converting to the carrier dtype."""
    arr = np.ascontiguousarray(data, dtype=_NUMPY_DTYPE[dtype])
    if dtype == DType.BF16:
        arr = np.asarray(bf16_round(arr), dtype=np.float32)
    return Tensor(arr, dtype)


@dataclass(frozen=True)
class QuantParams:
    scale: float
    zero_point: int
    bits: int

    def __post_init__(self):
        if self.scale <= 0:
            raise ValidationError("scale must be positive")
        if not 1 <= self.bits <= 16:
            raise ValidationError("bits must be in [1, 16]")


def quantize_features(x, bits):
    """Affine-quantize nonnegative (post-ReLU) features to unsigned codes.

    scale = max(x) / (2^bits - 1), zero_point = 0. An all-zero input gets
    scale = 1 by convention. Returns (Tensor of I32 codes, QuantParams).
    """
    if not 1 <= bits <= 16:
        raise ValidationError("bits must be in [1, 16]")
    arr = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float32)
    if not np.all(np.isfinite(arr)):
        raise NumericError("quantize_features rejects NaN/inf entries")
    if arr.min(initial=0.0) < 0:
        raise ValidationError("features must be nonnegative (post-ReLU)")
    qmax = (1 << bits) - 1
    peak = float(arr.max()) if arr.size else 0.0
    scale = peak / qmax if peak > 0 else 1.0
    codes = np.clip(np.rint(arr / scale), 0, qmax).astype(np.int32)
    return Tensor(codes, DType.I32), QuantParams(scale, 0, bits)


def dequantize(codes, params):
    arr = np.asarray(codes.data if isinstance(codes, Tensor) else codes)
    return (arr.astype(np.float64) - params.zero_point) * params.scale


def pack_u4(values):
    """Pack values in [0,15] two per byte, low nibble first; zero-pad last byte."""
    arr = np.asarray(values, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 15:
        raise ValidationError("U4 values must lie in [0, 15]")
    if arr.size % 2:
        arr = np.concatenate([arr, np.zeros(1, np.uint8)])
    return (arr[0::2] | (arr[1::2] << 4)).tobytes()

def unpack_u4(raw, count):
    b = np.frombuffer(raw, dtype=np.uint8)
    out = np.empty(2 * b.size, dtype=np.uint8)
    out[0::2] = b & 0x0F
    out[1::2] = b >> 4
    return out[:count]


def pack_bits(values, bits, signed=False):
    """Pack integers into a little-endian bitstream of `bits` per element."""
    arr = np.asarray(values, dtype=np.int64).ravel()
    if signed:
        lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    else:
        lo, hi = 0, (1 << bits) - 1
    if arr.size and (arr.min() < lo or arr.max() > hi):
        raise NumericError(f"values out of range for {bits}-bit packing")
    codes = (arr & ((1 << bits) - 1)).astype(np.uint32)
    nbits = bits * arr.size
    buf = np.zeros((nbits + 7) // 8, dtype=np.uint8)
    positions = np.arange(arr.size, dtype=np.int64) * bits
    for b in range(bits):
        bitpos = positions + b
        buf_idx = bitpos >> 3
        np.bitwise_or.at(buf, buf_idx, ((codes >> b) & 1).astype(np.uint8) << (bitpos & 7))
    return buf.tobytes()

def unpack_bits(raw, bits, count, signed=False):
    buf = np.frombuffer(raw, dtype=np.uint8)
    positions = np.arange(count, dtype=np.int64) * bits
    out = np.zeros(count, dtype=np.int64)
    for b in range(bits):
        bitpos = positions + b
        out |= (((buf[bitpos >> 3] >> (bitpos & 7)) & 1).astype(np.int64)) << b
    if signed:
        sign = 1 << (bits - 1)
        out = (out ^ sign) - sign
    return out


def checked_i32(arr, context="accumulation"):
    """Assert int64 values fit in signed 32 bits; overflow is a hard error."""
    arr = np.asarray(arr)
    if arr.size and (arr.min() < -(2**31) or arr.max() >= 2**31):
        raise NumericError(f"{context} overflows 32-bit signed range")
    return arr.astype(np.int32)
