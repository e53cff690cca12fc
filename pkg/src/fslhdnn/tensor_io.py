"""FSLT binary tensor files (little-endian, bit-exact).

Layout: magic "FSLT", version byte (1), dtype byte, rank byte,
rank x u32 dims, raw row-major payload. BF16 payloads store the upper
16 bits of the float32 pattern; U4 payloads pack two values per byte.
"""

import struct

import numpy as np

from .errors import FormatError
from .numerics import DType, Tensor, pack_u4, unpack_u4

MAGIC = b"FSLT"
VERSION = 1


def _payload_bytes(t: Tensor) -> bytes:
    if t.dtype == DType.BF16:
        return (t.data.view(np.uint32) >> 16).astype("<u2").tobytes()
    if t.dtype == DType.U4PACKED:
        return pack_u4(t.data)
    wire = {DType.F32: "<f4", DType.I32: "<i4", DType.I16: "<i2", DType.U8: "u1"}
    return t.data.astype(wire[t.dtype]).tobytes()


def save_tensor(path, t: Tensor):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BBB", VERSION, int(t.dtype), t.data.ndim))
        fh.write(struct.pack(f"<{t.data.ndim}I", *t.data.shape))
        fh.write(_payload_bytes(t))


def load_tensor(path) -> Tensor:
    with open(path, "rb") as fh:
        raw = fh.read()
    return tensor_from_bytes(raw)


def tensor_from_bytes(raw: bytes) -> Tensor:
    if raw[:4] != MAGIC:
        raise FormatError("not an FSLT file (bad magic)")
    version, dtype_code, rank = struct.unpack_from("<BBB", raw, 4)
    if version != VERSION:
        raise FormatError(f"unsupported FSLT version {version}")
    try:
        dtype = DType(dtype_code)
    except ValueError:
        raise FormatError(f"unknown dtype code {dtype_code}") from None
    if not 1 <= rank <= 4:
        raise FormatError(f"bad rank {rank}")
    dims = struct.unpack_from(f"<{rank}I", raw, 7)
    payload = raw[7 + 4 * rank :]
    count = int(np.prod(dims))
    if dtype == DType.BF16:
        if len(payload) != 2 * count:
            raise FormatError("payload length mismatch")
        bits = np.frombuffer(payload, dtype="<u2").astype(np.uint32) << 16
        data = bits.view(np.float32).reshape(dims).copy()
    elif dtype == DType.U4PACKED:
        if len(payload) != (count + 1) // 2:
            raise FormatError("payload length mismatch")
        data = unpack_u4(payload, count).reshape(dims)
    else:
        wire = {DType.F32: "<f4", DType.I32: "<i4", DType.I16: "<i2", DType.U8: "u1"}[dtype]
        itemsize = np.dtype(wire).itemsize
        if len(payload) != itemsize * count:
            raise FormatError("payload length mismatch")
        native = {DType.F32: np.float32, DType.I32: np.int32,
                  DType.I16: np.int16, DType.U8: np.uint8}[dtype]
        data = np.frombuffer(payload, dtype=wire).astype(native).reshape(dims)
    return Tensor(np.ascontiguousarray(data), dtype)
