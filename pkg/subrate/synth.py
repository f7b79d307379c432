"""
Synthetic datasets labelled by a simple, fully specified bit counter.

The bit counter (`oracle_rate`) stands in for an entropy coder. Per 4x4 sub-block it spends:

- 1 bit flagging whether the sub-block has a nonzero coefficient,
- if so, one significance bit per scan position up to and including the last nonzero one,
- per nonzero coefficient 1 sign bit and 1 greater-than-1 flag,
- per coefficient with `|c| > 1` an order-0 Exp-Golomb code of `|c| - 2` .

It is not claimed to match any real coder.
"""
from collections.abc import Sequence
from dataclasses import dataclass
import logging

import numpy as np

from .block import CoeffBlock, DatasetRecord
from .dataset import DatasetFile
from .failures import UsageFailure
from .features import tiles


__all__ = [
    "SynthConfig",
    "eg0_bits",
    "oracle_rate",
    "oracle_rates",
    "oracle_rates_array",
    "generate",
    "generate_block",
]


logger = logging.getLogger(__name__)


#: Largest magnitude drawn by the generator.
MAX_MAGNITUDE = 2 ** 15 - 1


@dataclass(frozen=True)
class SynthConfig:
    """
    Parameters of the synthetic generator.
    """
    n_blocks: int = 1000
    seed: int = 0
    #: Allowed (width, height) pairs, drawn uniformly.
    size_set: tuple[tuple[int, int], ...] = ((4, 4), (8, 8), (16, 16), (32, 32))
    #: Probability that a coefficient is zero.
    sparsity: float = 0.7
    #: Nonzero magnitudes follow a geometric law on {1, 2, ...} with mean `1 + magnitude_scale` .
    magnitude_scale: float = 2.0
    #: QP attached to every record.
    qp_label: int = 22
    #: Lowers the nonzero probability toward high frequencies. 0 keeps it uniform.
    frequency_decay: float = 0.0
    #: Number of consecutive blocks sharing one source image id.
    blocks_per_source: int = 64

    def __post_init__(self):
        if self.seed < 0:
            raise UsageFailure(f"Seed must not be negative, got {self.seed}.", seed=self.seed)
        if self.n_blocks < 0:
            raise UsageFailure("Number of blocks must not be negative.", n_blocks=self.n_blocks)
        if not 0.0 <= self.sparsity <= 1.0:
            raise UsageFailure(f"Sparsity must lie in [0, 1], got {self.sparsity}.", sparsity=self.sparsity)
        if not self.magnitude_scale > 0.0:
            raise UsageFailure(f"Magnitude scale must be positive, got {self.magnitude_scale}.", magnitude_scale=self.magnitude_scale)
        if self.frequency_decay < 0.0:
            raise UsageFailure("Frequency decay must not be negative.", frequency_decay=self.frequency_decay)
        if self.blocks_per_source <= 0:
            raise UsageFailure("Blocks per source must be positive.", blocks_per_source=self.blocks_per_source)
        if not self.size_set:
            raise UsageFailure("Size set must not be empty.")
        for w, h in self.size_set:
            if w <= 0 or h <= 0 or w % 4 or h % 4:
                raise UsageFailure(f"Block size {w}x{h} is not a positive multiple of 4.", width=w, height=h)


def eg0_bits(v: np.ndarray) -> np.ndarray:
    """
    Length of the order-0 Exp-Golomb code of non-negative integers: `2*floor(log2(v+1)) + 1` .
    """
    _, exponent = np.frexp(np.asarray(v, dtype=np.float64) + 1.0)
    return 2 * (exponent.astype(np.int64) - 1) + 1


def _rates(t: np.ndarray) -> np.ndarray:
    nonzero = t > 0
    last = np.where(nonzero.any(axis=2), 16 - np.argmax(nonzero[..., ::-1], axis=2), 0)
    large = t > 1
    escape = np.where(large, eg0_bits(np.maximum(t - 2, 0)), 0).sum(axis=2)
    per_subblock = 1 + last + 2 * nonzero.sum(axis=2) + escape
    return per_subblock.sum(axis=1).astype(np.int64)


def oracle_rates_array(coeffs: np.ndarray) -> np.ndarray:
    """
    Bit counts of equally shaped blocks given as an `(N, height, width)` array.
    """
    coeffs = np.asarray(coeffs)
    if coeffs.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return _rates(tiles(coeffs.astype(np.int64, copy=False)))


def oracle_rates(blocks: Sequence[CoeffBlock]) -> np.ndarray:
    """
    Bit counts of blocks of arbitrary sizes.
    """
    out = np.zeros(len(blocks), dtype=np.int64)
    groups: dict[tuple[int, int], list[int]] = {}
    for i, b in enumerate(blocks):
        groups.setdefault((b.height, b.width), []).append(i)
    for (h, w), indexes in groups.items():
        out[indexes] = oracle_rates_array(np.stack([blocks[i].coeffs for i in indexes]).reshape(len(indexes), h, w))
    return out


def oracle_rate(block: CoeffBlock) -> int:
    """
    Bit count of a block.

    >>> oracle_rate(CoeffBlock(8, 8, [0] * 64))
    4
    >>> oracle_rate(CoeffBlock.from_grid([[5, 0, 0, 0]] + [[0] * 4] * 3))
    9
    """
    return int(oracle_rates_array(block.grid[np.newaxis])[0])


def _nonzero_probability(config: SynthConfig, width: int, height: int) -> np.ndarray:
    base = 1.0 - config.sparsity
    if config.frequency_decay == 0.0:
        return np.full((height, width), base)
    rows = np.arange(height)[:, None] / height
    cols = np.arange(width)[None, :] / width
    return base * np.exp(-config.frequency_decay * (rows + cols))


def generate_block(config: SynthConfig, index: int) -> CoeffBlock:
    """
    Generates the block at `index` . The block depends only on the seed and the index, never on other blocks.
    """
    rng = np.random.default_rng([config.seed, index])
    width, height = config.size_set[int(rng.integers(len(config.size_set)))]
    nonzero = rng.random((height, width)) < _nonzero_probability(config, width, height)
    magnitude = np.minimum(rng.geometric(1.0 / (1.0 + config.magnitude_scale), size=(height, width)), MAX_MAGNITUDE)
    sign = rng.integers(0, 2, size=(height, width)) * 2 - 1
    coeffs = np.where(nonzero, magnitude * sign, 0)
    source = f"synth{config.seed}-{index // config.blocks_per_source}:{index % config.blocks_per_source}"
    return CoeffBlock(width, height, coeffs.reshape(-1), config.qp_label, source)


def generate(config: SynthConfig) -> DatasetFile:
    """
    Generates a dataset whose rates are the bit counts of `oracle_rate()` .

    The same configuration always generates the same records.
    """
    blocks = [generate_block(config, i) for i in range(config.n_blocks)]
    rates = oracle_rates(blocks)
    logger.info("Generated %d synthetic blocks with seed %d.", len(blocks), config.seed)
    return DatasetFile([DatasetRecord(b, float(r)) for b, r in zip(blocks, rates)])
