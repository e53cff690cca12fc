"""Cyclic Random Projection: LFSR blocks instead of a stored matrix.

Shows a generated 16x16 bipolar block, verifies block-streamed encoding
against the dense materialized matrix, and prints the memory story: the
full binary matrix at F=512, D=4096 versus the 512-bit generator state.
"""

import numpy as np

from fslhdnn import (CrpConfig, crp_memory_bits, dense_memory_bits, encode,
                     generate_block, materialize)
from fslhdnn.rng import keyed_rng


def main():
    config = CrpConfig(feature_dim=64, hv_dim=128, seed=42)
    block = generate_block(config, 0, 0)
    print("block (0, 0) of the projection matrix:")
    for row in block[:4]:
        print("  " + "".join("+" if v > 0 else "-" for v in row))
    print("  ... (12 more rows)")

    rng = keyed_rng(42, 0xE2C)
    x = rng.integers(0, 16, size=config.feature_dim).astype(np.int64)
    streamed = encode(config, x).values
    dense = materialize(config).astype(np.int64) @ x
    print(f"\nstreamed == dense oracle: {np.array_equal(streamed, dense)}")

    big = CrpConfig(512, 4096, 0)
    print(f"\ndense matrix at F=512, D=4096 : {dense_memory_bits(big):,} bits")
    print(f"generator state               : {crp_memory_bits(big)} bits")
    print(f"reduction                     : "
          f"{dense_memory_bits(big) // crp_memory_bits(big)}x")


if __name__ == "__main__":
    main()
