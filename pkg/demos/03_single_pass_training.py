"""Gradient-free few-shot training and the kNN baseline.

Trains class hypervectors in a single pass over a 5-way 5-shot support
set, demonstrates that batched training (sum features first, encode
once) matches per-sample encoding exactly, and compares HDC accuracy
against a 1-NN L1 baseline over 50 synthetic episodes.
"""

import numpy as np

from fslhdnn import (CrpConfig, EpisodeSpec, encode, make_synthetic_dataset,
                     run_episodes, train_batched, train_single_pass)
from fslhdnn.rng import keyed_rng


def main():
    rng = keyed_rng(0, 0xDE33)
    config = CrpConfig(feature_dim=64, hv_dim=512, seed=0)
    support = [(rng.integers(0, 16, size=64).astype(np.int64), s // 5)
               for s in range(25)]

    batched = train_batched(support, config, bits=4)
    sequential = train_single_pass(
        [(encode(config, x), lab) for x, lab in support], bits=4)
    print("batched == per-sample training:",
          np.array_equal(batched.values, sequential.values))
    print(f"class memory: {batched.n_classes} classes x {batched.hv_dim} dims "
          f"x {batched.bits} bits = {batched.footprint_bits():,} bits")

    data = make_synthetic_dataset(n_classes=20, feature_dim=256,
                                  samples_per_class=40, separation=4.0, seed=0)
    specs = [EpisodeSpec(5, 5, 5, seed=i) for i in range(50)]
    _, summary = run_episodes(data, specs, hv_dim=4096)
    print(f"\n50 episodes of 5-way 5-shot on the synthetic benchmark:")
    print(f"  HDC accuracy : {summary['mean_hdc_accuracy']:.3f}")
    print(f"  kNN-L1       : {summary['mean_knn_accuracy']:.3f}")


if __name__ == "__main__":
    main()
