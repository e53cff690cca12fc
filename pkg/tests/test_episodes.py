import numpy as np
import pytest

from fslhdnn import (EpisodeSpec, FeatureDataset, ValidationError,
                     make_synthetic_dataset, run_episode, run_episodes,
                     sample_episode)


@pytest.fixture(scope="module")
def dataset():
    return make_synthetic_dataset(n_classes=20, feature_dim=64,
                                  samples_per_class=20, separation=4.0, seed=0)


class TestSampleEpisode:
    def test_deterministic(self, dataset):
        spec = EpisodeSpec(5, 5, 3, seed=77)
        assert sample_episode(dataset, spec) == sample_episode(dataset, spec)

    def test_support_query_disjoint(self, dataset):
        spec = EpisodeSpec(5, 5, 3, seed=8)
        support, query = sample_episode(dataset, spec)
        assert not {i for i, _ in support} & {i for i, _ in query}
        assert len(support) == 25 and len(query) == 15

    def test_full_class_support(self):
        ds = make_synthetic_dataset(n_classes=3, feature_dim=16,
                                    samples_per_class=4, seed=1)
        support, query = sample_episode(ds, EpisodeSpec(2, 4, 0, seed=0))
        assert len(support) == 8 and query == []

    def test_insufficient_samples_rejected(self, dataset):
        with pytest.raises(ValidationError):
            sample_episode(dataset, EpisodeSpec(5, 19, 5, seed=0))
        with pytest.raises(ValidationError):
            sample_episode(dataset, EpisodeSpec(25, 1, 1, seed=0))

    def test_class_coverage_near_uniform(self, dataset):
        counts = np.zeros(20)
        episodes = 1000
        for ep in range(episodes):
            support, _ = sample_episode(dataset, EpisodeSpec(5, 1, 0, seed=ep))
            for i, _ in support:
                counts[dataset.labels[i]] += 1
        expected = episodes * 5 / 20
        assert counts.min() > 0
        assert np.all(np.abs(counts / expected - 1) <= 0.20)


class TestRunEpisode:
    def test_separable_classes_perfect_accuracy(self):
        # each class in its own orthant of a 16-d subspace
        n_classes, per = 5, 10
        feats = np.zeros((n_classes * per, 64), np.float32)
        for c in range(n_classes):
            feats[c * per:(c + 1) * per, c * 8:(c + 1) * 8] = 10.0
        feats += np.abs(np.random.default_rng(0).normal(
            0, 0.1, feats.shape)).astype(np.float32)
        labels = np.repeat(np.arange(n_classes), per)
        ds = FeatureDataset(feats, labels)
        r = run_episode(ds, EpisodeSpec(5, 5, 5, seed=3), hv_dim=1024)
        assert r["hdc_accuracy"] == 1.0
        assert r["knn_accuracy"] == 1.0

    def test_no_queries_reports_absent(self, dataset):
        r = run_episode(dataset, EpisodeSpec(5, 5, 0, seed=4), hv_dim=512)
        assert r["hdc_accuracy"] is None
        assert r["knn_accuracy"] is None

    def test_reproducible(self, dataset):
        a = run_episode(dataset, EpisodeSpec(5, 5, 3, seed=5), hv_dim=512)
        b = run_episode(dataset, EpisodeSpec(5, 5, 3, seed=5), hv_dim=512)
        assert a == b

    def test_resubstitution_is_perfect_at_16_bits(self):
        ds = make_synthetic_dataset(n_classes=6, feature_dim=32,
                                    samples_per_class=5, separation=6.0,
                                    seed=6)
        # support == query: feed the same samples back as queries
        from fslhdnn import CrpConfig, encode, infer, train_batched
        from fslhdnn.numerics import quantize_features
        spec = EpisodeSpec(5, 5, 0, seed=7)
        support_idx, _ = sample_episode(ds, spec)
        support = []
        for i, lab in support_idx:
            q, _ = quantize_features(ds.features[i], 4)
            support.append((q.data.astype(np.int64), lab))
        cfg = CrpConfig(32, 2048, 1)
        mem = train_batched(support, cfg, bits=16)
        hits = sum(infer(encode(cfg, f), mem).class_id == lab
                   for f, lab in support)
        assert hits == len(support)


class TestRunEpisodes:
    def test_thread_count_does_not_change_results(self, dataset):
        specs = [EpisodeSpec(5, 5, 2, seed=100 + i) for i in range(8)]
        r1, s1 = run_episodes(dataset, specs, threads=1, hv_dim=512)
        r4, s4 = run_episodes(dataset, specs, threads=4, hv_dim=512)
        assert r1 == r4
        assert s1 == s4

    def test_synthetic_noninferiority(self, dataset):
        specs = [EpisodeSpec(5, 5, 3, seed=200 + i) for i in range(50)]
        _, summary = run_episodes(dataset, specs, hv_dim=1024)
        assert summary["mean_hdc_accuracy"] >= summary["mean_knn_accuracy"] - 0.02
        assert summary["mean_hdc_accuracy"] > 0.95
