"""Early-exit inference: stop when consecutive blocks agree.

Trains a per-branch class table on a small bundled CNN, then sweeps the
(E_s, E_c) policy and prints how many convolution layers each setting
executes on average, next to its accuracy. E_s is the first block where
confidence checks run; E_c is the required run of agreeing predictions.
"""

import numpy as np

from fslhdnn import (ExitPolicy, branch_setup, infer_early_exit,
                     make_small_cnn, make_synthetic_images, train_branches)
from fslhdnn.rng import keyed_rng


def main():
    model = make_small_cnn(seed=0, widths=(8, 12, 16, 20))
    data = make_synthetic_images(n_classes=5, samples_per_class=16, hw=16,
                                 separation=3.0, seed=1)
    setup = branch_setup(model, data.images[0], hv_dim=1024, seed=0)

    rng = keyed_rng(0, 0xDE34)
    support, queries = [], []
    for cls in range(data.n_classes):
        members = np.flatnonzero(data.labels == cls)
        picked = rng.choice(members, 10, replace=False)
        support += [(data.images[i], cls) for i in picked[:5]]
        queries += [(data.images[i], cls) for i in picked[5:]]
    memory = train_branches(model, support, setup, bits=4)
    print(f"class memory footprint: {memory.footprint_bits():,} bits "
          f"({memory.branch_count} branches)")

    policies = [("full pipeline", ExitPolicy(enabled=False)),
                ("Es=1, Ec=1", ExitPolicy(1, 1)),
                ("Es=1, Ec=2", ExitPolicy(1, 2)),
                ("Es=2, Ec=2", ExitPolicy(2, 2))]
    print(f"\n{'policy':<14} {'avg conv layers':>16} {'accuracy':>9}")
    for name, policy in policies:
        layers, hits = [], 0
        for img, lab in queries:
            pred, trace = infer_early_exit(model, memory, img, setup, policy)
            layers.append(trace.layers_executed)
            hits += pred.class_id == lab
        print(f"{name:<14} {np.mean(layers):>16.2f} "
              f"{hits / len(queries):>9.2f}")


if __name__ == "__main__":
    main()
