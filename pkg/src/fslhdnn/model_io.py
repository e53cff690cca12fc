"""Binary model files: FSLC (clustered layers), FSLM (model graphs),
FSLH (class memories). All little-endian.

FSLC: magic "FSLC", version, u16 layer count; per layer cout/cin/k/
ch_sub/N/stride/pad (u32), BF16 codebooks, indices as a packed
log2(N)-bit stream in row-major [cout, cin, k, k] order.

FSLM: magic "FSLM", version, u16 layer count; per layer a type byte and
its parameter block. Conv layers embed either inline F32 weights or a
single FSLC layer record.

FSLH: magic "FSLH", version, C, D, bits, branch_count; then per branch,
per class: scale (f32) and bit-packed signed values.
"""

import math
import struct

import numpy as np

from .classifier import ClassMemory
from .clustering import ClusteredLayer
from .errors import FormatError
from .extractor import (AvgPoolGlobal, BlockBoundary, Conv, ElementwiseAdd,
                        Mark, MaxPool, ModelGraph, ReLU)
from .numerics import pack_bits, unpack_bits

_FSLC_MAGIC = b"FSLC"
_FSLM_MAGIC = b"FSLM"
_FSLH_MAGIC = b"FSLH"
_VERSION = 1


def _bf16_bytes(arr):
    return (np.asarray(arr, np.float32).view(np.uint32) >> 16).astype("<u2").tobytes()


def _bf16_from(raw, count):
    bits = np.frombuffer(raw[: 2 * count], dtype="<u2").astype(np.uint32) << 16
    return bits.view(np.float32).copy()


def _clustered_record(layer: ClusteredLayer) -> bytes:
    idx_bits = int(math.log2(layer.n_centroids))
    head = struct.pack("<7I", layer.cout, layer.cin, layer.k, layer.ch_sub,
                       layer.n_centroids, layer.stride, layer.padding)
    body = _bf16_bytes(layer.codebooks) + pack_bits(layer.indices, idx_bits)
    return head + struct.pack("<I", len(body)) + body


def _read_clustered(buf, off):
    cout, cin, k, ch_sub, n, stride, pad = struct.unpack_from("<7I", buf, off)
    off += 28
    (body_len,) = struct.unpack_from("<I", buf, off)
    off += 4
    body = buf[off : off + body_len]
    off += body_len
    n_groups = (cin + ch_sub - 1) // ch_sub
    nbook = cout * n_groups * n
    codebooks = _bf16_from(body, nbook).reshape(cout, n_groups, n)
    idx_bits = int(math.log2(n))
    indices = unpack_bits(body[2 * nbook :], idx_bits, cout * cin * k * k)
    layer = ClusteredLayer(cout, cin, k, ch_sub, n,
                           codebooks, indices.astype(np.int32).reshape(cout, cin, k, k),
                           stride, pad)
    return layer, off


def save_clustered(path, layers):
    """Write one or more ClusteredLayers as an FSLC file."""
    if isinstance(layers, ClusteredLayer):
        layers = [layers]
    with open(path, "wb") as fh:
        fh.write(_FSLC_MAGIC)
        fh.write(struct.pack("<BH", _VERSION, len(layers)))
        for layer in layers:
            fh.write(_clustered_record(layer))


def load_clustered(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != _FSLC_MAGIC:
        raise FormatError("not an FSLC file")
    version, count = struct.unpack_from("<BH", buf, 4)
    if version != _VERSION:
        raise FormatError(f"unsupported FSLC version {version}")
    off = 7
    layers = []
    for _ in range(count):
        layer, off = _read_clustered(buf, off)
        layers.append(layer)
    return layers


_LAYER_CODES = {
    "conv_inline": 0, "conv_clustered": 1, "relu": 2, "maxpool": 3,
    "avgpool_global": 4, "block_boundary": 5, "mark": 6, "add": 7,
}


def save_model(path, model: ModelGraph):
    chunks = [_FSLM_MAGIC, struct.pack("<BH", _VERSION, len(model.layers))]
    for layer in model.layers:
        if isinstance(layer, Conv):
            if layer.clustered:
                chunks.append(struct.pack("<B", _LAYER_CODES["conv_clustered"]))
                chunks.append(_clustered_record(layer.weights))
            else:
                w = np.asarray(layer.weights, np.float32)
                chunks.append(struct.pack("<B", _LAYER_CODES["conv_inline"]))
                chunks.append(struct.pack("<6I", *w.shape, layer.stride,
                                          layer.padding))
                chunks.append(w.astype("<f4").tobytes())
        elif isinstance(layer, ReLU):
            chunks.append(struct.pack("<B", _LAYER_CODES["relu"]))
        elif isinstance(layer, MaxPool):
            chunks.append(struct.pack("<BII", _LAYER_CODES["maxpool"],
                                      layer.k, layer.stride))
        elif isinstance(layer, AvgPoolGlobal):
            chunks.append(struct.pack("<B", _LAYER_CODES["avgpool_global"]))
        elif isinstance(layer, BlockBoundary):
            chunks.append(struct.pack("<B", _LAYER_CODES["block_boundary"]))
        elif isinstance(layer, Mark):
            chunks.append(struct.pack("<BI", _LAYER_CODES["mark"], layer.tag))
        elif isinstance(layer, ElementwiseAdd):
            chunks.append(struct.pack("<BI", _LAYER_CODES["add"], layer.tag))
        else:
            raise FormatError(f"cannot serialize layer {layer!r}")
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_model(path) -> ModelGraph:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != _FSLM_MAGIC:
        raise FormatError("not an FSLM file")
    version, count = struct.unpack_from("<BH", buf, 4)
    if version != _VERSION:
        raise FormatError(f"unsupported FSLM version {version}")
    off = 7
    layers = []
    for _ in range(count):
        code = buf[off]
        off += 1
        if code == _LAYER_CODES["conv_inline"]:
            cout, cin, kh, kw, stride, pad = struct.unpack_from("<6I", buf, off)
            off += 24
            n = cout * cin * kh * kw
            w = np.frombuffer(buf[off : off + 4 * n], dtype="<f4").astype(
                np.float32
            ).reshape(cout, cin, kh, kw)
            off += 4 * n
            layers.append(Conv(w, stride, pad))
        elif code == _LAYER_CODES["conv_clustered"]:
            layer, off = _read_clustered(buf, off)
            layers.append(Conv(layer, layer.stride, layer.padding))
        elif code == _LAYER_CODES["relu"]:
            layers.append(ReLU())
        elif code == _LAYER_CODES["maxpool"]:
            k, stride = struct.unpack_from("<II", buf, off)
            off += 8
            layers.append(MaxPool(k, stride))
        elif code == _LAYER_CODES["avgpool_global"]:
            layers.append(AvgPoolGlobal())
        elif code == _LAYER_CODES["block_boundary"]:
            layers.append(BlockBoundary())
        elif code == _LAYER_CODES["mark"]:
            (tag,) = struct.unpack_from("<I", buf, off)
            off += 4
            layers.append(Mark(tag))
        elif code == _LAYER_CODES["add"]:
            (tag,) = struct.unpack_from("<I", buf, off)
            off += 4
            layers.append(ElementwiseAdd(tag))
        else:
            raise FormatError(f"unknown layer code {code}")
    return ModelGraph(layers)


def save_class_memory(path, memory: ClassMemory):
    with open(path, "wb") as fh:
        fh.write(_FSLH_MAGIC)
        fh.write(struct.pack("<BHIHH", _VERSION, memory.n_classes, memory.hv_dim,
                             memory.bits, memory.branch_count))
        for b in range(memory.branch_count):
            for c in range(memory.n_classes):
                fh.write(struct.pack("<f", float(memory.scales[b, c])))
                vals = memory.values[b, c]
                if memory.bits == 1:
                    fh.write(pack_bits((vals > 0).astype(np.int64), 1))
                else:
                    fh.write(pack_bits(vals, memory.bits, signed=True))
        for b in range(memory.branch_count):
            fh.write(memory.shot_counts[b].astype("<i4").tobytes())


def load_class_memory(path) -> ClassMemory:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != _FSLH_MAGIC:
        raise FormatError("not an FSLH file")
    version, n_classes, hv_dim, bits, branches = struct.unpack_from("<BHIHH", buf, 4)
    if version != _VERSION:
        raise FormatError(f"unsupported FSLH version {version}")
    off = 15
    row_bytes = (hv_dim * bits + 7) // 8
    values = np.empty((branches, n_classes, hv_dim), np.int32)
    scales = np.empty((branches, n_classes), np.float32)
    for b in range(branches):
        for c in range(n_classes):
            (scales[b, c],) = struct.unpack_from("<f", buf, off)
            off += 4
            raw = buf[off : off + row_bytes]
            off += row_bytes
            if bits == 1:
                vals = unpack_bits(raw, 1, hv_dim) * 2 - 1
            else:
                vals = unpack_bits(raw, bits, hv_dim, signed=True)
            values[b, c] = vals
    shots = np.frombuffer(
        buf[off : off + 4 * branches * n_classes], dtype="<i4"
    ).astype(np.int32).reshape(branches, n_classes)
    return ClassMemory(n_classes, hv_dim, bits, values, scales, shots)
