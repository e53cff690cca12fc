"""Analytic op-count comparison of on-device learning regimes.

Counts forward-pass operations of the bundled CNN, then evaluates three
ways to adapt to a 10-way 5-shot episode: full fine-tuning (5
iterations, all phases), partial fine-tuning (15 iterations, head
only), and the single-pass clustered-CNN + HDC pipeline.
"""

import numpy as np

from fslhdnn import (cluster_model, cost_fsl_hdnn, cost_full_ft,
                     cost_partial_ft, estimate_ft_phases, hdc_cost_per_sample,
                     make_small_cnn, run_model)
from fslhdnn.cost import CostBreakdown, estimate_partial_gc


def main():
    model = make_small_cnn(seed=0)
    probe = np.zeros((3, 16, 16), np.float32)
    direct = run_model(model, probe, "direct")
    fp = direct.ops.total()
    fp_clustered = run_model(cluster_model(model), probe,
                             "clustered").ops.total()
    f_dim = direct.branches[-1].dim
    n_way, n_sample = 10, 50

    full = cost_full_ft(CostBreakdown(cost_fp=fp, t_itr=5, n_sample=n_sample,
                                      **estimate_ft_phases(fp)))
    partial = cost_partial_ft(CostBreakdown(
        cost_fp=fp, cost_gc=estimate_partial_gc(f_dim, n_way),
        t_itr=15, n_sample=n_sample))
    hdnn = cost_fsl_hdnn(CostBreakdown(
        cost_fp=fp_clustered,
        cost_hdc=hdc_cost_per_sample(f_dim, 4096, n_way),
        n_sample=n_sample))

    print(f"forward pass: {fp:,} ops direct, {fp_clustered:,} clustered")
    print(f"\n10-way 5-shot adaptation cost (total ops):")
    print(f"  full fine-tuning (5 itr)    : {full:>14,}")
    print(f"  partial fine-tuning (15 itr): {partial:>14,}")
    print(f"  single-pass pipeline        : {hdnn:>14,}")
    print(f"\nfull / single-pass ratio: {full / hdnn:.1f}x")


if __name__ == "__main__":
    main()
