from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .failures import InvalidBlockFailure


__all__ = [
    "CoeffBlock",
    "SubBlockView",
    "DatasetRecord",
    "SUBBLOCK_SIZE",
    "subblocks",
    "assemble",
]


#: Side length of the square sub-blocks every feature is computed on.
SUBBLOCK_SIZE = 4

_COEFF_MIN = np.iinfo(np.int32).min
_COEFF_MAX = np.iinfo(np.int32).max


def _frozen_array(values: Any) -> np.ndarray:
    try:
        raw = np.asarray(values)
    except (TypeError, ValueError) as e:
        raise InvalidBlockFailure(f"Coefficients are not an integer sequence: {e}")
    if raw.size and raw.dtype.kind not in "iu":
        if raw.dtype.kind == "f" and np.all(np.isfinite(raw)) and np.all(raw == np.round(raw)):
            pass
        else:
            raise InvalidBlockFailure("Coefficients must be integers.")
    if raw.size and (raw.min() < _COEFF_MIN or raw.max() > _COEFF_MAX):
        raise InvalidBlockFailure("Coefficients exceed the 32 bit signed range.")
    arr = np.array(raw, dtype=np.int32).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class CoeffBlock:
    """
    A block of signed quantized transform coefficients.

    Coefficients are kept in row-major order as a read-only `int32` array.
    Both dimensions must be positive multiples of 4 so that the block tiles exactly into 4x4 sub-blocks.

    >>> b = CoeffBlock(8, 4, [0] * 32, qp=22, source_id="img:0")
    >>> b.grid.shape
    (4, 8)
    """
    width: int
    height: int
    coeffs: np.ndarray
    qp: int = 0
    source_id: str = ""

    def __post_init__(self):
        for name in ("width", "height"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise InvalidBlockFailure(f"{name} must be an integer.", **{name: v})
            if v <= 0 or v % SUBBLOCK_SIZE != 0:
                raise InvalidBlockFailure(f"{name} must be a positive multiple of {SUBBLOCK_SIZE}, got {v}.", **{name: v})
        coeffs = _frozen_array(self.coeffs)
        if coeffs.size != self.width * self.height:
            raise InvalidBlockFailure(
                f"Block of {self.width}x{self.height} needs {self.width * self.height} coefficients, got {coeffs.size}.",
                width=self.width, height=self.height, count=coeffs.size,
            )
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "qp", int(self.qp))
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_grid(cls, grid: Sequence[Sequence[int]], qp: int = 0, source_id: str = "") -> 'CoeffBlock':
        """
        Creates a block from rows of coefficients.
        """
        arr = np.asarray(grid)
        if arr.ndim != 2:
            raise InvalidBlockFailure("A grid must be two dimensional.")
        return cls(arr.shape[1], arr.shape[0], arr.reshape(-1), qp, source_id)

    @property
    def grid(self) -> np.ndarray:
        """
        Returns the coefficients as a read-only `(height, width)` array.
        """
        return self.coeffs.reshape(self.height, self.width)

    @property
    def pixels(self) -> int:
        return self.width * self.height

    @property
    def subblock_count(self) -> int:
        return self.pixels // (SUBBLOCK_SIZE * SUBBLOCK_SIZE)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoeffBlock):
            return NotImplemented
        return (self.width, self.height, self.qp, self.source_id) == (other.width, other.height, other.qp, other.source_id) \
            and bool(np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self) -> int:
        return hash((self.width, self.height, self.qp, self.source_id, self.coeffs.tobytes()))

    def __repr__(self) -> str:
        return f"CoeffBlock({self.width}x{self.height}, qp={self.qp}, source_id={self.source_id!r})"


@dataclass(frozen=True)
class SubBlockView:
    """
    One 4x4 tile of a block.
    """
    #: 16 coefficients in row-major order.
    values: tuple[int, ...]
    #: (row, col) of the top-left coefficient within the parent block.
    origin: tuple[int, int]

    def __post_init__(self):
        if len(self.values) != SUBBLOCK_SIZE * SUBBLOCK_SIZE:
            raise InvalidBlockFailure(f"A sub-block holds 16 values, got {len(self.values)}.")
        if any(o < 0 or o % SUBBLOCK_SIZE != 0 for o in self.origin):
            raise InvalidBlockFailure(f"Sub-block origin {self.origin} is not aligned to the 4x4 grid.")


@dataclass(frozen=True)
class DatasetRecord:
    """
    A block paired with its measured rate in bits.
    """
    block: CoeffBlock
    rate_bits: float = field(default=0.0)

    def __post_init__(self):
        rate = float(self.rate_bits)
        if not np.isfinite(rate) or rate < 0:
            raise InvalidBlockFailure(f"Rate must be a finite non-negative number, got {self.rate_bits}.", rate=self.rate_bits)
        object.__setattr__(self, "rate_bits", rate)


def subblocks(block: CoeffBlock) -> list[SubBlockView]:
    """
    Splits a block into its 4x4 sub-blocks.

    Args:
        block: A block.
    Returns:
        `(width/4)*(height/4)` views in raster order of their origins.
    """
    grid = block.grid
    views = []
    for r in range(0, block.height, SUBBLOCK_SIZE):
        for c in range(0, block.width, SUBBLOCK_SIZE):
            tile = grid[r:r+SUBBLOCK_SIZE, c:c+SUBBLOCK_SIZE]
            views.append(SubBlockView(tuple(int(v) for v in tile.reshape(-1)), (r, c)))
    return views


def assemble(width: int, height: int, views: Iterable[SubBlockView]) -> list[int]:
    """
    Rebuilds the row-major coefficient sequence of a block from its sub-block views.

    Raises:
        InvalidBlockFailure: A view lies outside the block or the views do not cover it exactly once.
    """
    grid = np.zeros((height, width), dtype=np.int64)
    covered = np.zeros((height, width), dtype=np.int64)
    for view in views:
        r, c = view.origin
        if r + SUBBLOCK_SIZE > height or c + SUBBLOCK_SIZE > width:
            raise InvalidBlockFailure(f"Sub-block at {view.origin} lies outside a {width}x{height} block.")
        grid[r:r+SUBBLOCK_SIZE, c:c+SUBBLOCK_SIZE] = np.asarray(view.values).reshape(SUBBLOCK_SIZE, SUBBLOCK_SIZE)
        covered[r:r+SUBBLOCK_SIZE, c:c+SUBBLOCK_SIZE] += 1
    if not np.all(covered == 1):
        raise InvalidBlockFailure("Sub-blocks do not tile the block exactly once.")
    return [int(v) for v in grid.reshape(-1)]
