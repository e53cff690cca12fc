"""Branch-wise encode/infer with (E_s, E_c) early termination.

Every block boundary yields an average-pooled branch feature; each branch
has its own projection matrix (seed mixed with the branch index) and its
own row of class hypervectors. Inference stops once E_c consecutive
branch predictions agree, starting the checks at block E_s (1-based).
"""

from dataclasses import dataclass, field

import numpy as np

from .classifier import (CLASS_MEMORY_BUDGET_BITS, ClassMemory,
                         _quantize_class_vectors, batched_class_sums, infer)
from .crp import BLOCK_SIDE, CrpConfig, encode
from .errors import ValidationError
from .extractor import ModelGraph, Conv, run_layers, OpCounts, _global_avg
from .numerics import quantize_features


@dataclass(frozen=True)
class ExitPolicy:
    e_start: int = 1   # 1-based block index where confidence checks begin
    e_consec: int = 1  # consecutive agreeing predictions required
    enabled: bool = True

    def __post_init__(self):
        if self.e_start < 1 or self.e_consec < 1:
            raise ValidationError("e_start and e_consec must be >= 1")


@dataclass
class ExitTrace:
    predictions: list   # per checked block: (block 1-based, class_id)
    exit_block: int     # 1-based block where inference stopped
    layers_executed: int  # conv layers actually run


@dataclass(frozen=True)
class BranchSetup:
    """Per-branch encoder configs plus raw (unpadded) feature dims."""

    configs: tuple      # CrpConfig per branch
    raw_dims: tuple     # channel width of each branch feature
    feature_bits: int


def _pad16(n):
    return ((n + BLOCK_SIDE - 1) // BLOCK_SIDE) * BLOCK_SIDE


def branch_setup(model: ModelGraph, probe_image, hv_dim, seed, feature_bits=4,
                 mode="direct"):
    """Derive per-branch feature dims and encoder configs from one probe run."""
    from .extractor import run_model

    result = run_model(model, probe_image, mode)
    dims = tuple(b.dim for b in result.branches)
    configs = tuple(
        CrpConfig(_pad16(d), hv_dim, seed ^ (bi + 1)) for bi, d in enumerate(dims)
    )
    return BranchSetup(configs, dims, feature_bits)


def _branch_feature_codes(feature, setup: BranchSetup, branch):
    codes, _ = quantize_features(feature, setup.feature_bits)
    vec = codes.data.astype(np.int64).ravel()
    padded = np.zeros(setup.configs[branch].feature_dim, np.int64)
    padded[: vec.size] = vec
    return padded


def train_branches(model: ModelGraph, support_set, setup: BranchSetup, bits,
                   mode="direct", budget_bits=CLASS_MEMORY_BUDGET_BITS):
    """Batched single-pass training of one class table per branch."""
    from .extractor import run_model

    if not support_set:
        raise ValidationError("empty support set")
    n_branches = len(setup.configs)
    n_classes = max(label for _, label in support_set) + 1
    hv_dim = setup.configs[0].hv_dim
    footprint = n_branches * n_classes * hv_dim * bits
    if footprint > budget_bits:
        raise ValidationError(
            f"class memory footprint {footprint} bits exceeds budget {budget_bits}"
        )
    per_branch = [[] for _ in range(n_branches)]
    for image, label in support_set:
        result = run_model(model, image, mode)
        if len(result.branches) != n_branches:
            raise ValidationError("model branch count does not match setup")
        for bi, bf in enumerate(result.branches):
            per_branch[bi].append((_branch_feature_codes(bf.values, setup, bi), label))
    values, scales, shots = [], [], []
    for bi in range(n_branches):
        sums, counts = batched_class_sums(per_branch[bi], setup.configs[bi],
                                          n_classes=n_classes)
        codes, s = _quantize_class_vectors(sums / counts[:, None], bits)
        values.append(codes)
        scales.append(s)
        shots.append(counts)
    return ClassMemory(
        n_classes=n_classes,
        hv_dim=hv_dim,
        bits=bits,
        values=np.stack(values),
        scales=np.stack(scales).astype(np.float32),
        shot_counts=np.stack(shots).astype(np.int32),
    )


def infer_early_exit(model: ModelGraph, memory: ClassMemory, image,
                     setup: BranchSetup, policy: ExitPolicy, mode="direct"):
    """Run blocks in order, checking branch predictions per the policy."""
    blocks = model.blocks()
    n_blocks = len(blocks)
    if memory.branch_count != n_blocks:
        raise ValidationError("memory branch count does not match model blocks")
    x = np.asarray(image.data if hasattr(image, "data") else image, np.float32)
    ops = OpCounts()
    marks = {}
    conv_counter = [0]
    history = []
    consec = []
    for bi, block in enumerate(blocks):
        x = run_layers(x, block, mode, ops, marks, conv_counter)
        is_last = bi == n_blocks - 1
        check = policy.enabled and (bi + 1) >= policy.e_start
        if not check and not is_last:
            continue
        feat = _global_avg(x) if x.ndim == 3 else x.ravel().astype(np.float32)
        codes = _branch_feature_codes(feat, setup, bi)
        hv = encode(setup.configs[bi], codes)
        pred = infer(hv, memory, branch=bi)
        history.append((bi + 1, pred.class_id))
        consec.append(pred.class_id)
        if check and len(consec) >= policy.e_consec:
            window = consec[-policy.e_consec :]
            if all(c == window[0] for c in window):
                return pred, ExitTrace(history, bi + 1, conv_counter[0])
        if is_last:
            return pred, ExitTrace(history, bi + 1, conv_counter[0])
    raise AssertionError("unreachable: final block always returns")


def exit_statistics(traces, model: ModelGraph):
    """Mean conv layers executed and a histogram of exits per block."""
    if not traces:
        raise ValidationError("no traces")
    hist = {}
    for t in traces:
        hist[t.exit_block] = hist.get(t.exit_block, 0) + 1
    avg = sum(t.layers_executed for t in traces) / len(traces)
    return {"avg_layers": avg, "exit_histogram": dict(sorted(hist.items()))}
