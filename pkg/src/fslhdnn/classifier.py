"""Single-pass HDC training, quantized class memory, L1 inference.

Training is gradient-free: a class hypervector is just the elementwise
sum of its sample hypervectors. The batched variant sums raw features per
class and encodes once, which equals per-sample encoding by linearity of
the projection.
"""

from dataclasses import dataclass, field

import numpy as np

from .crp import CrpConfig, Hypervector, encode, encode_batch
from .errors import NumericError, ValidationError

CLASS_MEMORY_BUDGET_BITS = 256 * 1024 * 8  # 256 KB class memory


@dataclass
class ClassMemory:
    """Per-branch table of quantized class hypervectors."""

    n_classes: int
    hv_dim: int
    bits: int
    values: np.ndarray       # [branch_count, C, D] int32, fits `bits` signed
    scales: np.ndarray       # [branch_count, C] float32
    shot_counts: np.ndarray  # [branch_count, C] int32

    def __post_init__(self):
        if not 2 <= self.n_classes <= 128:
            raise ValidationError("n_classes must be in [2, 128]")
        if not 1 <= self.bits <= 16:
            raise ValidationError("bits must be in [1, 16]")

    @property
    def branch_count(self):
        return self.values.shape[0]

    def footprint_bits(self):
        return self.branch_count * self.n_classes * self.hv_dim * self.bits


@dataclass(frozen=True)
class Prediction:
    class_id: int
    distances: np.ndarray  # int64, per class
    branch_index: int


def _quantize_class_vectors(raw, bits):
    """Symmetric saturating quantization per class vector; returns
    (int32 codes, float32 scales)."""
    peaks = np.abs(raw).max(axis=-1)
    if bits == 1:
        # sign binarization; zero maps to +1 so codes stay in {-1, +1}
        scales = np.where(peaks > 0, peaks, 1.0).astype(np.float32)
        codes = np.where(raw >= 0, 1, -1)
        return codes.astype(np.int32), scales
    qmax = (1 << (bits - 1)) - 1
    scales = np.where(peaks > 0, peaks / qmax, 1.0).astype(np.float32)
    codes = np.clip(np.rint(raw / scales[..., None]), -qmax, qmax)
    return codes.astype(np.int32), scales


def aggregate_class_sums(encoded, n_classes=None):
    """Elementwise per-class sums of hypervectors, in int64.

    Order-independent by construction; overflow past int32 is an error
    since the accumulators are 32-bit."""
    if not encoded:
        raise ValidationError("no training samples")
    labels = [label for _, label in encoded]
    if n_classes is None:
        n_classes = max(labels) + 1
    d = encoded[0][0].dim
    sums = np.zeros((n_classes, d), np.int64)
    counts = np.zeros(n_classes, np.int64)
    for hv, label in encoded:
        if not 0 <= label < n_classes:
            raise ValidationError(f"label {label} out of range")
        if hv.dim != d:
            raise ValidationError("hypervector dimensions differ")
        sums[label] += hv.values
        counts[label] += 1
    if (counts == 0).any():
        raise ValidationError("every class needs at least one sample")
    if sums.min() < -(2**31) or sums.max() >= 2**31:
        raise NumericError("class aggregation overflows int32")
    return sums, counts


def train_single_pass(encoded, bits):
    """Aggregate encoded (Hypervector, label) pairs into a ClassMemory."""
    sums, counts = aggregate_class_sums(encoded)
    # store the shot-normalized prototype so class vectors live on the
    # same magnitude scale as a single query hypervector
    codes, scales = _quantize_class_vectors(sums / counts[:, None], bits)
    return ClassMemory(
        n_classes=sums.shape[0],
        hv_dim=sums.shape[1],
        bits=bits,
        values=codes[None],
        scales=scales[None].astype(np.float32),
        shot_counts=counts[None].astype(np.int32),
    )


def batched_class_sums(features, config: CrpConfig, n_classes=None):
    """Per-class raw-feature sums encoded once each; int64 [C, D].

    Equals aggregate_class_sums over per-sample encodings exactly, by
    linearity. Feature sums wider than 16 bits are encoded via the dense
    path (the widening is internal, never a silent error)."""
    if not features:
        raise ValidationError("no training samples")
    labels = [label for _, label in features]
    if n_classes is None:
        n_classes = max(labels) + 1
    f = np.asarray(features[0][0]).size
    sums = np.zeros((n_classes, f), np.int64)
    counts = np.zeros(n_classes, np.int64)
    for feat, label in features:
        if not 0 <= label < n_classes:
            raise ValidationError(f"label {label} out of range")
        sums[label] += np.asarray(feat, np.int64).ravel()
        counts[label] += 1
    if (counts == 0).any():
        raise ValidationError("every class needs at least one sample")
    if sums.min() >= -(1 << 15) and sums.max() < (1 << 15):
        hvs = [encode(config, s).values.astype(np.int64) for s in sums]
    else:
        hvs = [hv.values.astype(np.int64) for hv in _encode_wide(config, sums)]
    return np.stack(hvs), counts


def _encode_wide(config, sums):
    # int32-range inputs: exact via the materialized matrix
    from .crp import materialize

    m = materialize(config).astype(np.int64)
    out = sums @ m.T
    if out.min() < -(2**31) or out.max() >= 2**31:
        raise NumericError("hypervector accumulation overflows int32")
    return [Hypervector(row.astype(np.int32)) for row in out]


def train_batched(features, config: CrpConfig, bits):
    """Batched single-pass training on raw integer feature vectors."""
    sums, counts = batched_class_sums(features, config)
    codes, scales = _quantize_class_vectors(sums / counts[:, None], bits)
    return ClassMemory(
        n_classes=sums.shape[0],
        hv_dim=sums.shape[1],
        bits=bits,
        values=codes[None],
        scales=scales[None].astype(np.float32),
        shot_counts=counts[None].astype(np.int32),
    )


def infer(query_hv, memory: ClassMemory, branch=0):
    """Nearest class under L1 distance, ties to the lowest class id.

    The query is aligned to each class vector's quantization scale
    (rounded division by the recorded scale) before the subtract-abs-
    accumulate runs in int64."""
    q = query_hv.values if isinstance(query_hv, Hypervector) else np.asarray(query_hv)
    if q.size != memory.hv_dim:
        raise ValidationError(f"query dim {q.size} != memory D {memory.hv_dim}")
    if not 0 <= branch < memory.branch_count:
        raise ValidationError(f"branch {branch} out of range")
    table = memory.values[branch].astype(np.int64)
    scales = memory.scales[branch].astype(np.float64)
    aligned = np.rint(q.astype(np.float64)[None, :] / scales[:, None]).astype(np.int64)
    distances = np.abs(aligned - table).sum(axis=1)
    return Prediction(int(np.argmin(distances)), distances, branch)


def knn_l1_baseline(query_feature, support_set):
    """1-NN under L1 in raw feature space; lowest-index tie-break."""
    if not support_set:
        raise ValidationError("empty support set")
    q = np.asarray(query_feature, np.int64).ravel()
    best_d, best_label = None, None
    for feat, label in support_set:
        f = np.asarray(feat, np.int64).ravel()
        if f.size != q.size:
            raise ValidationError("feature dimensions differ")
        d = int(np.abs(q - f).sum())
        if best_d is None or d < best_d:
            best_d, best_label = d, label
    return best_label
