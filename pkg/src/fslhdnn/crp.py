"""Cyclic Random Projection encoder.

The D x F bipolar projection matrix is never stored: 16 LFSRs regenerate
it in 16x16 blocks. Block (r, c) is a pure function of (seed, r, c), so
blocks are randomly accessible and a dense materialization oracle is
cheap at test scale. Because the tap set is maximal-length, all nonzero
states lie on one cycle of length 2^16 - 1; we precompute that cycle once
and turn "advance the LFSR n steps" into a table lookup.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericError, ValidationError

BLOCK_SIDE = 16
_PERIOD = (1 << 16) - 1
# Fibonacci LFSR, taps at bit positions 16,15,13,4 (x^16+x^15+x^13+x^4+1)
_TAP_SHIFTS = (0, 1, 3, 12)
_SEED_MIX = 0x9E37


def lfsr_next(state):
    """One right-shift Fibonacci step; 16-bit nonzero in, nonzero out."""
    if not 0 < state < (1 << 16):
        raise ValidationError(f"LFSR state must be nonzero 16-bit, got {state}")
    fb = 0
    for s in _TAP_SHIFTS:
        fb ^= state >> s
    return (state >> 1) | ((fb & 1) << 15)


@lru_cache(maxsize=1)
def _lfsr_cycle():
    """(cycle, position) tables: cycle[i] is the state i steps after 1,
    position[state] is that state's index on the cycle."""
    cycle = np.empty(_PERIOD, np.uint32)
    pos = np.zeros(1 << 16, np.uint32)
    s = 1
    for i in range(_PERIOD):
        cycle[i] = s
        pos[s] = i
        s = lfsr_next(s)
    assert s == 1  # maximal-length taps close the cycle
    return cycle, pos


def lfsr_advance(state, steps):
    """State after `steps` lfsr_next calls, in O(1) via the cycle table."""
    cycle, pos = _lfsr_cycle()
    return int(cycle[(int(pos[state]) + steps) % _PERIOD])


@dataclass(frozen=True)
class CrpConfig:
    feature_dim: int  # F
    hv_dim: int       # D
    seed: int

    # Hardware supports F in [16,1024] and D in [1024,8192]; the software
    # model only requires multiples of the block side so small oracle
    # configurations stay testable.
    def __post_init__(self):
        if self.feature_dim < BLOCK_SIDE or self.feature_dim % BLOCK_SIDE:
            raise ValidationError("feature_dim must be a positive multiple of 16")
        if self.hv_dim < BLOCK_SIDE or self.hv_dim % BLOCK_SIDE:
            raise ValidationError("hv_dim must be a positive multiple of 16")

    @property
    def block_cols(self):
        return self.feature_dim // BLOCK_SIDE

    @property
    def block_rows(self):
        return self.hv_dim // BLOCK_SIDE


@dataclass(frozen=True)
class Hypervector:
    values: np.ndarray  # int32
    declared_bits: int = 16

    def __post_init__(self):
        if self.values.dtype != np.int32:
            raise ValidationError("hypervector values must be int32")
        if not 1 <= self.declared_bits <= 16:
            raise ValidationError("declared_bits must be in [1,16]")

    @property
    def dim(self):
        return self.values.size


def _initial_states(seed):
    """Per-row LFSR seeds: nonzero 16-bit mixes of the 64-bit seed."""
    states = np.empty(BLOCK_SIDE, np.uint32)
    for r in range(BLOCK_SIDE):
        s = (seed ^ ((r + 1) * _SEED_MIX)) & 0xFFFF
        states[r] = s if s else 1
    return states


def _states_to_rows(states):
    """16-bit states -> rows of {-1,+1}: bit j of state r is entry [r, j]."""
    bits = (states[:, None] >> np.arange(BLOCK_SIDE)[None, :]) & 1
    return (2 * bits.astype(np.int8) - 1)


def generate_block(config, block_row, block_col):
    """The 16x16 bipolar block at grid position (block_row, block_col)."""
    if not 0 <= block_row < config.block_rows:
        raise ValidationError(f"block_row {block_row} out of range")
    if not 0 <= block_col < config.block_cols:
        raise ValidationError(f"block_col {block_col} out of range")
    step = block_row * config.block_cols + block_col
    states = _advanced_states(config.seed, np.array([step], np.int64))[:, 0]
    return _states_to_rows(states)


def _advanced_states(seed, steps):
    """States of all 16 LFSRs after 16*steps[i] advances; [16, len(steps)]."""
    cycle, pos = _lfsr_cycle()
    init = _initial_states(seed)
    offsets = (pos[init][:, None].astype(np.int64)
               + BLOCK_SIDE * steps[None, :]) % _PERIOD
    return cycle[offsets]


def _materialize_key(config):
    return (config.feature_dim, config.hv_dim, config.seed)


@lru_cache(maxsize=8)
def _materialize_cached(key):
    f, d, seed = key
    config = CrpConfig(f, d, seed)
    nblocks = config.block_rows * config.block_cols
    states = _advanced_states(seed, np.arange(nblocks, dtype=np.int64))
    rows = _states_to_rows(states.reshape(-1))   # [16*nblocks, 16]
    rows = rows.reshape(BLOCK_SIDE, config.block_rows, config.block_cols, BLOCK_SIDE)
    # [lane, brow, bcol, bit] -> [brow, lane, bcol, bit] -> [D, F]
    return np.ascontiguousarray(
        rows.transpose(1, 0, 2, 3).reshape(d, f)
    )


def materialize(config):
    """Dense D x F {-1,+1} matrix (int8); the test oracle and the fast path."""
    return _materialize_cached(_materialize_key(config))


def encode(config, feature, declared_bits=16):
    """h = M . x over int32, processed 16 output lanes at a time.

    Feature entries must fit signed 16 bits (4-bit codes in the default
    flow). Raises NumericError on int32 overflow of the accumulation.
    """
    x = np.asarray(feature.data if hasattr(feature, "data") else feature)
    x = np.asarray(x, np.int64).ravel()
    if x.size != config.feature_dim:
        raise ValidationError(
            f"feature length {x.size} != configured F {config.feature_dim}"
        )
    if x.size and (x.min() < -(1 << 15) or x.max() >= (1 << 15)):
        raise NumericError("feature entries must fit signed 16 bits")
    h = np.empty(config.hv_dim, np.int64)
    for br in range(config.block_rows):
        # one row of blocks = a 16 x F strip; sweep its block columns
        steps = br * config.block_cols + np.arange(config.block_cols, dtype=np.int64)
        states = _advanced_states(config.seed, steps)       # [16, bcols]
        strip = _states_to_rows(states.reshape(-1)).reshape(
            BLOCK_SIDE, config.block_cols * BLOCK_SIDE
        )
        h[br * 16:(br + 1) * 16] = strip.astype(np.int64) @ x
    if h.size and (h.min() < -(2**31) or h.max() >= 2**31):
        raise NumericError("hypervector accumulation overflows int32")
    return Hypervector(h.astype(np.int32), declared_bits)


def encode_batch(config, features, declared_bits=16):
    """Encode rows of `features` [n, F] at once via the materialized matrix.

    Bit-identical to `encode` per row (integer arithmetic is exact)."""
    x = np.asarray(features, np.int64)
    if x.ndim != 2 or x.shape[1] != config.feature_dim:
        raise ValidationError("features must be [n, F]")
    m = materialize(config).astype(np.int64)
    h = x @ m.T
    if h.size and (h.min() < -(2**31) or h.max() >= 2**31):
        raise NumericError("hypervector accumulation overflows int32")
    return [Hypervector(row.astype(np.int32), declared_bits) for row in h]


def crp_memory_bits(config):
    """Constant storage: one 16x16 initial block plus 16 x 16-bit LFSR states."""
    return BLOCK_SIDE * BLOCK_SIDE + BLOCK_SIDE * 16


def dense_memory_bits(config):
    """Storage for the full binary base matrix at 1 bit per weight."""
    return config.feature_dim * config.hv_dim
