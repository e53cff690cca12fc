import numpy as np
import pytest

from fslhdnn import (CrpConfig, NumericError, ValidationError, crp_memory_bits,
                     dense_memory_bits, encode, encode_batch, generate_block,
                     lfsr_next, materialize)
from fslhdnn.crp import lfsr_advance
from fslhdnn.rng import keyed_rng


class TestLfsr:
    def test_single_step_from_one(self):
        # feedback taps {0,1,3,12}: only bit 0 set -> feedback 1, state
        # shifts right and the new bit lands in bit 15
        assert lfsr_next(0x0001) == 0x8000

    def test_full_period(self):
        s = 0xACE1
        seen = s
        for _ in range((1 << 16) - 1):
            s = lfsr_next(s)
        assert s == seen

    def test_nonzero_closure(self):
        s = 0xFFFF
        for _ in range(1000):
            s = lfsr_next(s)
            assert s != 0

    def test_zero_state_rejected(self):
        with pytest.raises(ValidationError):
            lfsr_next(0)

    def test_advance_matches_iteration(self):
        s = 0x1234
        stepped = s
        for i in range(257):
            assert lfsr_advance(s, i) == stepped
            stepped = lfsr_next(stepped)


class TestGenerateBlock:
    CFG = CrpConfig(32, 32, seed=99)

    def test_deterministic(self):
        a = generate_block(self.CFG, 0, 0)
        b = generate_block(self.CFG, 0, 0)
        np.testing.assert_array_equal(a, b)

    def test_alphabet_and_shape(self):
        blk = generate_block(self.CFG, 1, 1)
        assert blk.shape == (16, 16)
        assert set(np.unique(blk)) <= {-1, 1}

    def test_materialization_is_block_concatenation(self):
        m = materialize(self.CFG)
        for br in range(2):
            for bc in range(2):
                np.testing.assert_array_equal(
                    m[br * 16:(br + 1) * 16, bc * 16:(bc + 1) * 16],
                    generate_block(self.CFG, br, bc),
                )

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            generate_block(self.CFG, 2, 0)
        with pytest.raises(ValidationError):
            generate_block(self.CFG, 0, 2)


class TestEncode:
    def test_zero_feature(self):
        cfg = CrpConfig(16, 32, seed=1)
        hv = encode(cfg, np.zeros(16, np.int64))
        np.testing.assert_array_equal(hv.values, np.zeros(32, np.int32))

    def test_unit_vector_extracts_column(self):
        cfg = CrpConfig(16, 16, seed=2)
        blk = generate_block(cfg, 0, 0)
        for j in (0, 7, 15):
            e = np.zeros(16, np.int64)
            e[j] = 1
            hv = encode(cfg, e)
            np.testing.assert_array_equal(hv.values, blk[:, j])
            assert set(np.unique(hv.values)) <= {-1, 1}

    @pytest.mark.parametrize("f,d", [(32, 64), (48, 112), (128, 128)])
    def test_dense_oracle(self, f, d):
        cfg = CrpConfig(f, d, seed=5)
        m = materialize(cfg).astype(np.int64)
        rng = keyed_rng(f, d)
        for _ in range(20):
            x = rng.integers(0, 16, size=f)
            hv = encode(cfg, x)
            np.testing.assert_array_equal(hv.values, m @ x)

    def test_batch_matches_scalar(self):
        cfg = CrpConfig(32, 48, seed=6)
        rng = keyed_rng(42)
        feats = rng.integers(0, 16, size=(10, 32))
        hvs = encode_batch(cfg, feats)
        for row, hv in zip(feats, hvs):
            np.testing.assert_array_equal(hv.values, encode(cfg, row).values)

    def test_linearity(self):
        cfg = CrpConfig(32, 64, seed=7)
        rng = keyed_rng(43)
        x = rng.integers(0, 16, size=32)
        y = rng.integers(0, 16, size=32)
        a, b = 3, -2
        lhs = encode(cfg, a * x + b * y).values
        rhs = a * encode(cfg, x).values + b * encode(cfg, y).values
        np.testing.assert_array_equal(lhs, rhs)

    def test_dimension_mismatch(self):
        cfg = CrpConfig(32, 64, seed=8)
        with pytest.raises(ValidationError):
            encode(cfg, np.zeros(16, np.int64))

    def test_feature_width_limit(self):
        cfg = CrpConfig(16, 32, seed=9)
        with pytest.raises(NumericError):
            encode(cfg, np.full(16, 1 << 15, np.int64))

    def test_seed_sensitivity(self):
        a = materialize(CrpConfig(64, 128, seed=10))
        b = materialize(CrpConfig(64, 128, seed=11))
        frac = np.mean(a != b)
        assert frac >= 0.45

    def test_distance_preservation(self):
        # rank correlation between feature-space L2 and HV-space L1 over
        # random 4-bit feature pairs (JL-style sanity check)
        cfg = CrpConfig(256, 4096, seed=12)
        rng = keyed_rng(44)
        n_pairs = 1000
        feats = rng.integers(0, 16, size=(2 * n_pairs, 256))
        hvs = encode_batch(cfg, feats)
        vals = np.stack([h.values for h in hvs]).astype(np.int64)
        a, b = feats[:n_pairs], feats[n_pairs:]
        ha, hb = vals[:n_pairs], vals[n_pairs:]
        l2 = np.sqrt(((a - b) ** 2).sum(axis=1))
        l1 = np.abs(ha - hb).sum(axis=1)

        def ranks(v):
            order = np.argsort(v, kind="stable")
            r = np.empty(len(v))
            r[order] = np.arange(len(v))
            return r

        rho = np.corrcoef(ranks(l2), ranks(l1))[0, 1]
        assert rho > 0.9


class TestMemoryClaims:
    def test_dense_bits_at_reference_point(self):
        cfg = CrpConfig(512, 4096, seed=0)
        assert dense_memory_bits(cfg) == 2_097_152  # 256 KB at 1 bit/weight

    def test_crp_bits_constant(self):
        for f, d in [(16, 1024), (512, 4096), (1024, 8192)]:
            assert crp_memory_bits(CrpConfig(f, d, seed=0)) == 512

    def test_reduction_ratio(self):
        cfg = CrpConfig(512, 4096, seed=0)
        assert dense_memory_bits(cfg) // crp_memory_bits(cfg) == 4096
