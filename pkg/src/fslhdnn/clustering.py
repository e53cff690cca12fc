"""Per-group K-means weight clustering for convolution layers.

Weights of each (output channel, ch_sub-wide input-channel group) are
replaced by N BF16 centroids (the codebook) plus a log2(N)-bit index per
weight. Also provides the compression / op-reduction metrics of the
clustered form against a plain INT8 baseline.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError
from .numerics import bf16_round
from .rng import keyed_rng


@dataclass(frozen=True)
class ClusteredLayer:
    """Compressed convolution layer: codebooks + index tensor."""

    cout: int
    cin: int
    k: int
    ch_sub: int
    n_centroids: int
    codebooks: np.ndarray  # [cout, n_groups, N] float32, BF16 values
    indices: np.ndarray    # [cout, cin, k, k] int32, each < N
    stride: int = 1
    padding: int = 0

    @property
    def n_groups(self):
        return (self.cin + self.ch_sub - 1) // self.ch_sub

    def group_slice(self, g):
        return slice(g * self.ch_sub, min((g + 1) * self.ch_sub, self.cin))


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


def _kmeans_1d(points, n, rng, tol=1e-6, max_iters=100):
    """Seeded k-means++ then Lloyd on 1-D data.

    Returns (centroids, labels, objective history). Empty clusters are
    reseeded to the point farthest from its nearest centroid.
    """
    pts = points.astype(np.float64)
    centroids = np.empty(n)
    centroids[0] = pts[rng.integers(len(pts))]
    for i in range(1, n):
        d2 = np.min((pts[:, None] - centroids[None, :i]) ** 2, axis=1)
        total = d2.sum()
        if total <= 0:
            centroids[i] = pts[rng.integers(len(pts))]
        else:
            centroids[i] = pts[rng.choice(len(pts), p=d2 / total)]

    history = []
    for _ in range(max_iters):
        dist = np.abs(pts[:, None] - centroids[None, :])
        labels = np.argmin(dist, axis=1)
        history.append(float(np.sum((pts - centroids[labels]) ** 2)))
        new = centroids.copy()
        for c in range(n):
            mask = labels == c
            if mask.any():
                new[c] = pts[mask].mean()
            else:
                gap = np.min(np.abs(pts[:, None] - new[None, :]), axis=1)
                new[c] = pts[np.argmax(gap)]
        move = np.max(np.abs(new - centroids))
        centroids = new
        if move < tol:
            break
    dist = np.abs(pts[:, None] - centroids[None, :])
    labels = np.argmin(dist, axis=1)
    history.append(float(np.sum((pts - centroids[labels]) ** 2)))
    return centroids, labels, history


def cluster_layer(weights, ch_sub, n_centroids, seed, stride=1, padding=0):
    """Cluster a [cout, cin, k, k] weight tensor into a ClusteredLayer.

    Deterministic given (weights, seed); each group's K-means is keyed by
    (seed, output channel, group index) so parallel execution cannot
    change the result.
    """
    w = np.asarray(weights.data if hasattr(weights, "data") else weights, np.float32)
    if w.ndim != 4:
        raise ValidationError("weights must be [cout, cin, k, k]")
    if not np.all(np.isfinite(w)):
        raise NumericError("weights must be finite")
    cout, cin, kh, kw = w.shape
    if kh != kw:
        raise ValidationError("kernels must be square")
    if ch_sub < 1:
        raise ValidationError("ch_sub must be >= 1")
    if not _is_pow2(n_centroids) or not 2 <= n_centroids <= 256:
        raise ValidationError("n_centroids must be a power of two in [2, 256]")
    k = kh
    n_groups = (cin + ch_sub - 1) // ch_sub
    codebooks = np.zeros((cout, n_groups, n_centroids), np.float32)
    indices = np.zeros((cout, cin, k, k), np.int32)
    for oc in range(cout):
        for g in range(n_groups):
            lo, hi = g * ch_sub, min((g + 1) * ch_sub, cin)
            pts = w[oc, lo:hi].ravel()
            if n_centroids > pts.size:
                raise ValidationError(
                    f"n_centroids={n_centroids} exceeds group weight count {pts.size}"
                )
            rng = keyed_rng(seed, oc, g)
            centroids, _, _ = _kmeans_1d(pts, n_centroids, rng)
            centroids = np.asarray(bf16_round(centroids.astype(np.float32)))
            labels = np.argmin(np.abs(pts[:, None] - centroids[None, :]), axis=1)
            codebooks[oc, g] = centroids
            indices[oc, lo:hi] = labels.reshape(hi - lo, k, k)
    return ClusteredLayer(cout, cin, k, ch_sub, n_centroids, codebooks, indices,
                          stride, padding)


def reconstruct(layer: ClusteredLayer):
    """Expand codebooks + indices back into a dense [cout, cin, k, k] array."""
    out = np.empty((layer.cout, layer.cin, layer.k, layer.k), np.float32)
    oc = np.arange(layer.cout)[:, None, None, None]
    for g in range(layer.n_groups):
        sl = layer.group_slice(g)
        out[:, sl] = layer.codebooks[oc, g, layer.indices[:, sl]]
    return out


def compression_ratio(layer_shape, ch_sub, n_centroids, baseline_bits=8):
    """Memory of a baseline_bits dense layer over the clustered layer.

    Clustered memory = log2(N) bits per weight index plus N BF16 codebook
    entries per group.
    """
    cout, cin, k = layer_shape
    weights = cout * cin * k * k
    groups = cout * ((cin + ch_sub - 1) // ch_sub)
    index_bits = weights * math.log2(n_centroids)
    codebook_bits = groups * n_centroids * 16
    return (weights * baseline_bits) / (index_bits + codebook_bits)


def op_reduction_ratio(k, n_centroids, ch_sub):
    """Ops per output pixel per group: baseline MACs over clustered form.

    Baseline: ch_sub*k^2 multiplies + ch_sub*k^2 - 1 adds. Clustered:
    ch_sub*k^2 index-driven accumulate adds, N codebook multiplies, and
    N - 1 reduction adds.
    """
    if k < 1 or n_centroids < 1 or ch_sub < 1:
        raise ValidationError("k, n_centroids, ch_sub must be >= 1")
    baseline = 2 * ch_sub * k * k - 1
    clustered = ch_sub * k * k + 2 * n_centroids - 1
    return baseline / clustered
