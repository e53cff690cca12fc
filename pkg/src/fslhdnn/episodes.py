"""N-way k-shot episode sampling and end-to-end pipeline runs.

Two ingestion paths: precomputed feature datasets (classifier-only
experiments) and image datasets pushed through a bundled small CNN for
the early-exit flow. A synthetic Gaussian-cluster benchmark generator is
included so nothing is downloaded.
"""

from dataclasses import dataclass

import numpy as np

from .classifier import infer, knn_l1_baseline, train_batched
from .crp import CrpConfig, encode_batch
from .errors import ValidationError
from .numerics import quantize_features
from .rng import keyed_rng


@dataclass
class FeatureDataset:
    features: np.ndarray  # [n, F] float32 or integer codes
    labels: np.ndarray    # [n] int
    provenance: str = ""

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise ValidationError("features and labels length mismatch")
        uniq = np.unique(self.labels)
        if not np.array_equal(uniq, np.arange(uniq.size)):
            raise ValidationError("labels must be dense in [0, class_count)")

    @property
    def n_classes(self):
        return int(self.labels.max()) + 1

    @property
    def feature_dim(self):
        return self.features.shape[1]


@dataclass(frozen=True)
class EpisodeSpec:
    n_way: int
    k_shot: int
    q_query: int
    seed: int

    def __post_init__(self):
        if self.n_way < 2 or self.k_shot < 1 or self.q_query < 0:
            raise ValidationError("need n_way >= 2, k_shot >= 1, q_query >= 0")


def make_synthetic_dataset(n_classes=20, feature_dim=256, samples_per_class=40,
                           separation=4.0, seed=0):
    """Gaussian class clusters with unit within-class sigma, ReLU-clipped.

    Class means are drawn on a nonnegative shell so that `separation`
    approximates the between-class distance in units of sigma."""
    rng = keyed_rng(seed, 0xDA7A)
    means = rng.normal(0.0, 1.0, size=(n_classes, feature_dim))
    means = np.abs(means) * separation / np.sqrt(2.0)
    feats = np.repeat(means, samples_per_class, axis=0)
    feats = feats + rng.normal(0.0, 1.0, size=feats.shape)
    feats = np.maximum(feats, 0.0).astype(np.float32)
    labels = np.repeat(np.arange(n_classes), samples_per_class)
    return FeatureDataset(feats, labels, provenance=f"synthetic seed={seed}")


def sample_episode(dataset: FeatureDataset, spec: EpisodeSpec):
    """Seeded support/query split; returns (support, query) index lists of
    (dataset index, episode label) pairs."""
    if dataset.n_classes < spec.n_way:
        raise ValidationError("dataset has too few classes")
    rng = keyed_rng(spec.seed, 0xE915)
    classes = rng.choice(dataset.n_classes, size=spec.n_way, replace=False)
    support, query = [], []
    need = spec.k_shot + spec.q_query
    for epi_label, cls in enumerate(classes):
        members = np.flatnonzero(dataset.labels == cls)
        if members.size < need:
            raise ValidationError(
                f"class {cls} has {members.size} samples, needs {need}"
            )
        picked = rng.choice(members, size=need, replace=False)
        support += [(int(i), epi_label) for i in picked[: spec.k_shot]]
        query += [(int(i), epi_label) for i in picked[spec.k_shot :]]
    return support, query


def run_episode(dataset: FeatureDataset, spec: EpisodeSpec, hv_dim=4096,
                crp_seed=0, feature_bits=4, hv_bits=4):
    """Train batched HDC on the support set, classify queries, and report
    accuracy next to the kNN-L1 baseline."""
    support_idx, query_idx = sample_episode(dataset, spec)
    feats = dataset.features

    def codes_of(i):
        q, _ = quantize_features(feats[i], feature_bits)
        return q.data.astype(np.int64).ravel()

    f_dim = dataset.feature_dim
    if f_dim % 16:
        raise ValidationError("feature_dim must be a multiple of 16")
    config = CrpConfig(f_dim, hv_dim, crp_seed)
    support = [(codes_of(i), lab) for i, lab in support_idx]
    memory = train_batched(support, config, hv_bits)

    result = {
        "n_way": spec.n_way,
        "k_shot": spec.k_shot,
        "q_query": spec.q_query,
        "seed": spec.seed,
    }
    if not query_idx:
        result["hdc_accuracy"] = None
        result["knn_accuracy"] = None
        return result

    q_codes = np.stack([codes_of(i) for i, _ in query_idx])
    q_labels = [lab for _, lab in query_idx]
    hvs = encode_batch(config, q_codes)
    hdc_hits = sum(
        infer(hv, memory).class_id == lab for hv, lab in zip(hvs, q_labels)
    )
    knn_hits = sum(
        knn_l1_baseline(q_codes[j], support) == q_labels[j]
        for j in range(len(q_labels))
    )
    n = len(q_labels)
    result["hdc_accuracy"] = hdc_hits / n
    result["knn_accuracy"] = knn_hits / n
    return result


def run_episodes(dataset, specs, threads=1, **kwargs):
    """Run many episodes; aggregate means are order-independent."""
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda s: run_episode(dataset, s, **kwargs), specs))
    else:
        results = [run_episode(dataset, s, **kwargs) for s in specs]
    scored = [r for r in results if r["hdc_accuracy"] is not None]
    summary = {
        "episodes": len(results),
        "mean_hdc_accuracy": (
            float(np.mean([r["hdc_accuracy"] for r in scored])) if scored else None
        ),
        "mean_knn_accuracy": (
            float(np.mean([r["knn_accuracy"] for r in scored])) if scored else None
        ),
    }
    return results, summary
