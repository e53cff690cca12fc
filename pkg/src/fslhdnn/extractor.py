"""Small-CNN execution in direct and clustered form, with op counting.

The clustered convolution path mirrors the partial-sum-reuse dataflow:
activations sharing a weight index are accumulated into per-code bins
first, then each bin is multiplied by its codebook centroid once. Branch
features (global average pooling per block) feed the HDC classifier.
"""

from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusteredLayer, reconstruct
from .errors import ValidationError
from .numerics import bf16_round


@dataclass
class Conv:
    weights: object  # np.ndarray [cout,cin,k,k] or ClusteredLayer
    stride: int = 1
    padding: int = 0

    @property
    def clustered(self):
        return isinstance(self.weights, ClusteredLayer)


@dataclass
class ReLU:
    pass


@dataclass
class MaxPool:
    k: int
    stride: int


@dataclass
class AvgPoolGlobal:
    pass


@dataclass
class BlockBoundary:
    pass


@dataclass
class Mark:
    tag: int


@dataclass
class ElementwiseAdd:
    tag: int


@dataclass
class ModelGraph:
    layers: list

    def blocks(self):
        """Split the layer list at BlockBoundary markers (markers dropped)."""
        out, cur = [], []
        for layer in self.layers:
            if isinstance(layer, BlockBoundary):
                out.append(cur)
                cur = []
            else:
                cur.append(layer)
        out.append(cur)
        return out

    def conv_count(self):
        return sum(isinstance(l, Conv) for l in self.layers)


@dataclass
class OpCounts:
    multiplies: int = 0
    adds: int = 0
    index_accumulates: int = 0

    def total(self):
        return self.multiplies + self.adds + self.index_accumulates

    def __iadd__(self, other):
        self.multiplies += other.multiplies
        self.adds += other.adds
        self.index_accumulates += other.index_accumulates
        return self


@dataclass
class BranchFeature:
    block_index: int
    values: np.ndarray  # F32 vector, spatial mean per channel
    dim: int


@dataclass
class RunResult:
    branches: list  # of BranchFeature
    ops: OpCounts
    final: np.ndarray = None


def _im2col(x, k, stride, pad):
    """[cin,H,W] -> patches [P, cin*k*k], P = out_h*out_w."""
    cin, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    oh = (x.shape[1] - k) // stride + 1
    ow = (x.shape[2] - k) // stride + 1
    if oh <= 0 or ow <= 0:
        raise ValidationError("kernel larger than padded input")
    windows = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]           # [cin, oh, ow, k, k]
    patches = windows.transpose(1, 2, 0, 3, 4).reshape(oh * ow, cin * k * k)
    return np.ascontiguousarray(patches), oh, ow


def conv_direct(x, weights, stride=1, pad=0, ops=None):
    """Plain cross-correlation with zero padding; the ground-truth path.

    Internally accumulates in float64 so integer-valued inputs produce
    exact results independent of summation order.
    """
    w = np.asarray(weights, np.float32)
    cout, cin, k, _ = w.shape
    if x.shape[0] != cin:
        raise ValidationError(f"input channels {x.shape[0]} != weight cin {cin}")
    patches, oh, ow = _im2col(np.asarray(x, np.float64), k, stride, pad)
    out = patches @ w.reshape(cout, -1).T.astype(np.float64)
    if ops is not None:
        p = oh * ow
        ops.multiplies += p * cout * cin * k * k
        ops.adds += p * cout * (cin * k * k - 1)
    return out.T.reshape(cout, oh, ow).astype(np.float32)


def conv_clustered(x, layer: ClusteredLayer, stride=None, pad=None,
                   accum="bf16", ops=None):
    """Convolution via per-code bin accumulation and one MAC per centroid.

    accum="bf16" rounds every bin add and MAC to BF16 (the hardware-like
    path); accum="f32" accumulates exactly (float64 internally) and then
    matches conv_direct on the reconstructed weights bit-for-bit whenever
    the arithmetic is exact.
    """
    if accum not in ("bf16", "f32"):
        raise ValidationError(f"unknown accumulation mode {accum!r}")
    stride = layer.stride if stride is None else stride
    pad = layer.padding if pad is None else pad
    if x.shape[0] != layer.cin:
        raise ValidationError(f"input channels {x.shape[0]} != layer cin {layer.cin}")
    k, n = layer.k, layer.n_centroids
    xp = np.asarray(x, np.float64 if accum == "f32" else np.float32)
    patches, oh, ow = _im2col(xp, k, stride, pad)
    p = oh * ow
    patches = patches.reshape(p, layer.cin, k * k)
    out = np.zeros((layer.cout, p), np.float64 if accum == "f32" else np.float32)
    for g in range(layer.n_groups):
        sl = layer.group_slice(g)
        pg = patches[:, sl].reshape(p, -1)          # [P, glen]
        glen = pg.shape[1]
        for oc in range(layer.cout):
            idx = layer.indices[oc, sl].ravel()
            code = layer.codebooks[oc, g]
            if accum == "f32":
                scatter = np.zeros((glen, n))
                scatter[np.arange(glen), idx] = 1.0
                bins = pg @ scatter
                out[oc] += bins @ code.astype(np.float64)
            else:
                # bins emulate the BF16 accumulation register files;
                # pairwise-tree reduction keeps the rounding error at
                # O(log n) adds per bin. The codebook MAC stage runs at
                # full precision.
                bins = np.zeros((p, n), np.float32)
                for j in range(n):
                    cols = pg[:, idx == j]
                    while cols.shape[1] > 1:
                        half = cols.shape[1] // 2
                        pair = bf16_round(cols[:, :half] + cols[:, half:2 * half])
                        if cols.shape[1] % 2:
                            cols = np.concatenate([pair, cols[:, -1:]], axis=1)
                        else:
                            cols = pair
                    if cols.shape[1]:
                        bins[:, j] = cols[:, 0]
                out[oc] += bins @ code
    if ops is not None:
        ops.index_accumulates += p * layer.cout * layer.cin * k * k
        ops.multiplies += p * layer.cout * layer.n_groups * n
        ops.adds += p * layer.cout * (layer.n_groups * (n - 1) + layer.n_groups - 1)
    return out.reshape(layer.cout, oh, ow).astype(np.float32)


def _global_avg(x):
    return x.mean(axis=(1, 2)).astype(np.float32)


def run_layers(x, layers, mode, ops, marks, conv_counter):
    """Execute one block's layers in order; mutates ops/marks/conv_counter."""
    for layer in layers:
        if isinstance(layer, Conv):
            conv_counter[0] += 1
            if layer.clustered:
                if mode == "clustered":
                    x = conv_clustered(x, layer.weights, layer.stride,
                                       layer.padding, ops=ops)
                else:
                    x = conv_direct(x, reconstruct(layer.weights),
                                    layer.stride, layer.padding, ops=ops)
            else:
                x = conv_direct(x, layer.weights, layer.stride, layer.padding,
                                ops=ops)
        elif isinstance(layer, ReLU):
            x = np.maximum(x, 0)
        elif isinstance(layer, MaxPool):
            cin, h, w = x.shape
            oh = (h - layer.k) // layer.stride + 1
            ow = (w - layer.k) // layer.stride + 1
            win = np.lib.stride_tricks.sliding_window_view(x, (layer.k, layer.k),
                                                           axis=(1, 2))
            x = win[:, ::layer.stride, ::layer.stride].max(axis=(3, 4))[:, :oh, :ow]
        elif isinstance(layer, AvgPoolGlobal):
            x = _global_avg(x)[:, None, None]
        elif isinstance(layer, Mark):
            marks[layer.tag] = x
        elif isinstance(layer, ElementwiseAdd):
            if layer.tag not in marks:
                raise ValidationError(f"no marked activation with tag {layer.tag}")
            skip = marks[layer.tag]
            if skip.shape != x.shape:
                raise ValidationError("residual shapes differ")
            x = (x + skip).astype(np.float32)
        else:
            raise ValidationError(f"unknown layer {layer!r}")
    return x


def run_model(model: ModelGraph, image, mode="direct"):
    """Run all blocks, collecting a branch feature at every block boundary
    and at the end. Returns RunResult with op counters."""
    x = np.asarray(image.data if hasattr(image, "data") else image, np.float32)
    ops = OpCounts()
    marks = {}
    conv_counter = [0]
    branches = []
    for bi, block in enumerate(model.blocks()):
        x = run_layers(x, block, mode, ops, marks, conv_counter)
        feat = _global_avg(x) if x.ndim == 3 else x.ravel().astype(np.float32)
        branches.append(BranchFeature(bi, feat, feat.size))
    return RunResult(branches, ops, final=x)
