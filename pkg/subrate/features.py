"""
The four sub-block features of a coefficient block.

Every feature is computed per 4x4 sub-block and summed over the block:

- `S` counts the nonzero coefficients.
- `L` sums `log2|c|` over the nonzero coefficients.
- `Z` sums the 1-based zig-zag position of the last nonzero coefficient of each sub-block (0 for an empty sub-block).
- `E` sums the binary entropy of the fraction of coefficients with `|c| > 1` in each sub-block.

All features depend on magnitudes only.
"""
from collections.abc import Sequence
from dataclasses import dataclass
import logging

import numpy as np

from .block import CoeffBlock, SUBBLOCK_SIZE
from .failures import InvalidBlockFailure


__all__ = [
    "ZIGZAG_4X4",
    "FeatureVector",
    "binary_entropy",
    "ENTROPY_TABLE",
    "feature_s",
    "feature_l",
    "feature_z",
    "feature_e",
    "extract",
    "extract_batch",
    "extract_array",
    "tiles",
]


logger = logging.getLogger(__name__)


#: Scan order of a 4x4 sub-block as (row, col) pairs.
ZIGZAG_4X4: tuple[tuple[int, int], ...] = (
    (0, 0), (0, 1), (1, 0), (2, 0),
    (1, 1), (0, 2), (0, 3), (1, 2),
    (2, 1), (3, 0), (3, 1), (2, 2),
    (1, 3), (2, 3), (3, 2), (3, 3),
)

assert sorted(ZIGZAG_4X4) == [(r, c) for r in range(4) for c in range(4)], "scan order must be a permutation"

_SCAN_INDEX = np.array([r * SUBBLOCK_SIZE + c for r, c in ZIGZAG_4X4], dtype=np.intp)
_TILE_AREA = SUBBLOCK_SIZE * SUBBLOCK_SIZE


def binary_entropy(p: float) -> float:
    """
    Binary entropy in bits with `H2(0) = H2(1) = 0` .
    """
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p))


#: `H2(k/16)` for every possible count `k` of coefficients with magnitude above 1.
ENTROPY_TABLE: np.ndarray = np.array([binary_entropy(k / _TILE_AREA) for k in range(_TILE_AREA + 1)])
ENTROPY_TABLE.flags.writeable = False


@dataclass(frozen=True)
class FeatureVector:
    """
    Block features `(S, L, Z, E)` .
    """
    s: float = 0.0
    l: float = 0.0
    z: float = 0.0
    e: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.l, self.z, self.e], dtype=np.float64)

    @classmethod
    def of(cls, values: Sequence[float]) -> 'FeatureVector':
        s, l, z, e = (float(v) for v in values)
        return cls(s, l, z, e)


def tiles(coeffs: np.ndarray) -> np.ndarray:
    """
    Rearranges blocks of equal shape into sub-block rows in scan order.

    Args:
        coeffs: `(N, height, width)` coefficients.
    Returns:
        `(N, nsb, 16)` magnitudes, sub-blocks in raster order of their origins, values in zig-zag order.
    """
    if coeffs.ndim != 3:
        raise InvalidBlockFailure(f"Expected an (N, height, width) array, got shape {coeffs.shape}.")
    n, h, w = coeffs.shape
    if h <= 0 or w <= 0 or h % SUBBLOCK_SIZE or w % SUBBLOCK_SIZE:
        raise InvalidBlockFailure(f"Block of {w}x{h} does not tile into 4x4 sub-blocks.", width=w, height=h)
    t = np.abs(coeffs).reshape(n, h // SUBBLOCK_SIZE, SUBBLOCK_SIZE, w // SUBBLOCK_SIZE, SUBBLOCK_SIZE)
    t = t.transpose(0, 1, 3, 2, 4).reshape(n, -1, _TILE_AREA)
    return t[..., _SCAN_INDEX]


def _features(t: np.ndarray) -> np.ndarray:
    nonzero = t > 0
    s = nonzero.sum(axis=2)

    logs = np.zeros(t.shape, dtype=np.float64)
    np.log2(t, out=logs, where=nonzero)
    l = logs.sum(axis=2)

    last = _TILE_AREA - np.argmax(nonzero[..., ::-1], axis=2)
    z = np.where(nonzero.any(axis=2), last, 0)

    e = ENTROPY_TABLE[(t > 1).sum(axis=2)]

    return np.stack([
        s.sum(axis=1).astype(np.float64),
        l.sum(axis=1),
        z.sum(axis=1).astype(np.float64),
        e.sum(axis=1),
    ], axis=1)


def extract_array(coeffs: np.ndarray) -> np.ndarray:
    """
    Computes the features of equally shaped blocks.

    Args:
        coeffs: `(N, height, width)` integer coefficients.
    Returns:
        `(N, 4)` array of `(S, L, Z, E)` rows.
    """
    coeffs = np.asarray(coeffs)
    if coeffs.shape[0] == 0:
        return np.zeros((0, 4), dtype=np.float64)
    return _features(tiles(coeffs.astype(np.int64, copy=False)))


def extract_batch(blocks: Sequence[CoeffBlock]) -> np.ndarray:
    """
    Computes the features of blocks of arbitrary sizes.

    Blocks are grouped by shape and each group is processed in one vectorized pass.

    Args:
        blocks: Blocks.
    Returns:
        `(N, 4)` array of `(S, L, Z, E)` rows in the order of `blocks` .
    """
    out = np.zeros((len(blocks), 4), dtype=np.float64)
    groups: dict[tuple[int, int], list[int]] = {}
    for i, b in enumerate(blocks):
        groups.setdefault((b.height, b.width), []).append(i)
    for (h, w), indexes in groups.items():
        stacked = np.stack([blocks[i].coeffs for i in indexes]).reshape(len(indexes), h, w)
        out[indexes] = extract_array(stacked)
    logger.debug("Extracted features of %d blocks in %d shape groups.", len(blocks), len(groups))
    return out


def extract(block: CoeffBlock) -> FeatureVector:
    """
    Computes the features of a block.

    >>> fv = extract(CoeffBlock.from_grid([[5, 2, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]]))
    >>> fv.s, fv.z, round(fv.l, 6), round(fv.e, 6)
    (3.0, 3.0, 3.321928, 0.543564)
    """
    return FeatureVector.of(extract_array(block.grid[np.newaxis])[0])


def feature_s(block: CoeffBlock) -> float:
    """
    Number of nonzero coefficients.
    """
    return extract(block).s


def feature_l(block: CoeffBlock) -> float:
    """
    Sum of `log2|c|` over nonzero coefficients.
    """
    return extract(block).l


def feature_z(block: CoeffBlock) -> float:
    """
    Sum over sub-blocks of the 1-based scan position of the last nonzero coefficient.
    """
    return extract(block).z


def feature_e(block: CoeffBlock) -> float:
    """
    Sum over sub-blocks of `H2(C1/16)` where `C1` counts coefficients with `|c| > 1` .
    """
    return extract(block).e
