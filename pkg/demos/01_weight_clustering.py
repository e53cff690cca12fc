"""Weight clustering and partial-sum-reuse convolution.

Clusters a convolution layer's weights into per-group codebooks, then
runs the same input through the direct convolution and the clustered
one, in both exact (f32) and hardware-like (bf16 bin accumulation)
modes. Prints the compression ratio, the op-reduction ratio, and the
worst-case relative error of each path.
"""

import numpy as np

from fslhdnn import (cluster_layer, compression_ratio, conv_clustered,
                     conv_direct, op_reduction_ratio, reconstruct)
from fslhdnn.rng import keyed_rng


def main():
    rng = keyed_rng(0, 0xDE30)
    cout, cin, k = 16, 64, 3
    ch_sub, n_centroids = 64, 16

    # a clustering-friendly weight tensor: a few modes plus jitter,
    # the shape trained weights tend to take
    modes = rng.normal(0.0, 0.2, size=12)
    w = rng.choice(modes, size=(cout, cin, k, k))
    w = (w + rng.normal(0.0, 1e-3, size=w.shape)).astype(np.float32)

    layer = cluster_layer(w, ch_sub, n_centroids, seed=0, padding=1)
    approx = reconstruct(layer)
    rms = float(np.sqrt(np.mean((w - approx) ** 2)))
    print(f"layer {cout}x{cin}x{k}x{k}, ch_sub={ch_sub}, N={n_centroids}")
    print(f"  reconstruction RMS error : {rms:.5f}")
    print(f"  compression ratio (8-bit): "
          f"{compression_ratio((cout, cin, k), ch_sub, n_centroids, 8)}")
    print(f"  op reduction per group   : "
          f"{op_reduction_ratio(k, n_centroids, ch_sub):.3f}")

    x = np.abs(rng.normal(0, 1, size=(cin, 16, 16))).astype(np.float32)
    ref = conv_direct(x, approx, stride=1, pad=1)
    exact = conv_clustered(x, layer, accum="f32")
    bf16 = conv_clustered(x, layer, accum="bf16")
    mag = conv_direct(np.abs(x), np.abs(np.asarray(approx)), stride=1, pad=1)
    print(f"  f32 path max |err|       : {np.abs(exact - ref).max():.2e}")
    print(f"  bf16 path worst rel err  : "
          f"{(np.abs(bf16 - ref) / mag).max():.2e} (budget 1e-2)")


if __name__ == "__main__":
    main()
