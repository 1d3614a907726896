"""Split images into N x N subpatterns and put them back together.

Tiles are enumerated row-major over the tile grid, and pixels row-major
within each tile.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SubpatternBatch:
    tile_px: int
    tiles_x: int
    tiles_y: int
    vectors: np.ndarray  # (tiles_y * tiles_x, tile_px ** 2)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors)
        if self.tile_px < 1 or self.tiles_x < 1 or self.tiles_y < 1:
            raise ValueError("tile sizes and counts must be positive")
        expected = (self.tiles_x * self.tiles_y, self.tile_px**2)
        if self.vectors.shape != expected:
            raise ValueError(f"batch vectors have shape {self.vectors.shape}, expected {expected}")

    def __len__(self):
        return self.vectors.shape[0]


def tile(image, tile_px: int) -> SubpatternBatch:
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    if tile_px < 1:
        raise ValueError("tile_px must be >= 1")
    h, w = img.shape
    if h % tile_px or w % tile_px:
        raise ValueError(f"image shape {img.shape} not divisible by tile size {tile_px}")
    ty, tx = h // tile_px, w // tile_px
    vectors = (
        img.reshape(ty, tile_px, tx, tile_px)
        .transpose(0, 2, 1, 3)
        .reshape(ty * tx, tile_px * tile_px)
    )
    return SubpatternBatch(tile_px, tx, ty, vectors.copy())


def untile(batch: SubpatternBatch) -> np.ndarray:
    n, tx, ty = batch.tile_px, batch.tiles_x, batch.tiles_y
    if batch.vectors.shape != (tx * ty, n * n):
        raise ValueError("batch vectors inconsistent with tile grid")
    return batch.vectors.reshape(ty, tx, n, n).transpose(0, 2, 1, 3).reshape(ty * n, tx * n)


def subpattern_pairs(degraded, clean, tile_px: int) -> tuple[np.ndarray, np.ndarray]:
    """Tile a degraded/clean image pair into aligned ``(K, N^2)`` input and target arrays."""
    degraded = np.asarray(degraded, dtype=np.float64)
    clean = np.asarray(clean, dtype=np.float64)
    if degraded.shape != clean.shape:
        raise ValueError(f"pair shape mismatch: {degraded.shape} vs {clean.shape}")
    targets = tile(clean, tile_px).vectors
    if np.any(targets < 0) or np.any(targets > 1):
        raise ValueError("clean targets must lie in [0, 1]")
    return tile(degraded, tile_px).vectors, targets
