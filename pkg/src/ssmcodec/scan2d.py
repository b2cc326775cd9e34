"""Four-direction 2D selective scan over feature maps.

A feature map (H, W, C) is unfolded into four 1D token sequences, one per
traversal direction, each sequence runs through its own selective scan, the
results are folded back onto the grid and summed. The four traversals are the
raster order, its exact reversal, the column-major order, and its reversal:
for a 2x2 map [[a, b], [c, d]] the sequences are [a,b,c,d], [d,c,b,a],
[a,c,b,d] and [d,b,c,a]. Fold is the exact inverse permutation of unfold.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .nn import ShapeError
from .ssm import S6Weights, s6_forward


class Direction(enum.Enum):
    ROW_MAJOR = "row_major"
    ROW_MAJOR_REVERSED = "row_major_reversed"
    COL_MAJOR = "col_major"
    COL_MAJOR_REVERSED = "col_major_reversed"


DIRECTIONS = (
    Direction.ROW_MAJOR,
    Direction.ROW_MAJOR_REVERSED,
    Direction.COL_MAJOR,
    Direction.COL_MAJOR_REVERSED,
)


@dataclass(frozen=True)
class ScanPattern:
    """One traversal of an H x W grid."""

    direction: Direction
    height: int
    width: int

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ShapeError(f"pattern extents must be positive, got {self.height}x{self.width}")


def unfold(f: np.ndarray, pattern: ScanPattern) -> np.ndarray:
    """Serialize (H, W, C) into (H*W, C) along the pattern's traversal."""
    if f.ndim != 3 or f.shape[:2] != (pattern.height, pattern.width):
        raise ShapeError(f"unfold: map shape {f.shape} mismatches pattern {pattern.height}x{pattern.width}")
    c = f.shape[2]
    if pattern.direction in (Direction.ROW_MAJOR, Direction.ROW_MAJOR_REVERSED):
        seq = f.reshape(pattern.height * pattern.width, c)
    else:
        seq = f.transpose(1, 0, 2).reshape(pattern.height * pattern.width, c)
    if pattern.direction in (Direction.ROW_MAJOR_REVERSED, Direction.COL_MAJOR_REVERSED):
        seq = seq[::-1]
    return np.ascontiguousarray(seq)


def fold(seq: np.ndarray, pattern: ScanPattern) -> np.ndarray:
    """Inverse of unfold: (H*W, C) back to (H, W, C)."""
    h, w = pattern.height, pattern.width
    if seq.ndim != 2 or seq.shape[0] != h * w:
        raise ShapeError(f"fold: sequence shape {seq.shape} mismatches {h}x{w} grid")
    if pattern.direction in (Direction.ROW_MAJOR_REVERSED, Direction.COL_MAJOR_REVERSED):
        seq = seq[::-1]
    if pattern.direction in (Direction.ROW_MAJOR, Direction.ROW_MAJOR_REVERSED):
        return np.ascontiguousarray(seq.reshape(h, w, seq.shape[1]))
    return np.ascontiguousarray(seq.reshape(w, h, seq.shape[1]).transpose(1, 0, 2))


@dataclass(frozen=True)
class Scan2dWeights:
    """One independent S6 parameter set per traversal direction."""

    directions: tuple[S6Weights, S6Weights, S6Weights, S6Weights]


def scan2d(f: np.ndarray, w: Scan2dWeights, parallel: bool = True) -> np.ndarray:
    """Run all four directional scans and merge by summation, in fixed order."""
    if f.ndim != 3:
        raise ShapeError(f"scan2d: expected (H, W, C), got {f.shape}")
    h, wd = f.shape[:2]
    out = None
    for direction, weights in zip(DIRECTIONS, w.directions):
        pattern = ScanPattern(direction, h, wd)
        y = fold(s6_forward(unfold(f, pattern), weights, parallel=parallel), pattern)
        out = y if out is None else out + y
    return out
