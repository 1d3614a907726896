"""Binary page data, image file I/O and bit-error scoring."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage


@dataclass(frozen=True)
class PageDataSpec:
    blocks_x: int = 100
    blocks_y: int = 100
    block_px: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.blocks_x < 1 or self.blocks_y < 1:
            raise ValueError("block counts must be positive")
        if self.block_px < 1:
            raise ValueError("block_px must be >= 1")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.blocks_y * self.block_px, self.blocks_x * self.block_px)


def generate_page_data(spec: PageDataSpec) -> np.ndarray:
    """Random binary page: each block is 0 or 1 with probability 1/2."""
    rng = np.random.default_rng(spec.seed)
    bits = rng.integers(0, 2, size=(spec.blocks_y, spec.blocks_x)).astype(np.float64)
    return np.kron(bits, np.ones((spec.block_px, spec.block_px)))


def block_means(image, block_px: int) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    if h % block_px or w % block_px:
        raise ValueError(f"image shape {img.shape} not divisible by block size {block_px}")
    return img.reshape(h // block_px, block_px, w // block_px, block_px).mean(axis=(1, 3))


def bit_error_rate(reference, candidate, block_px: int) -> float:
    """Fraction of blocks whose mean, thresholded at 0.5, disagrees with ``reference``.

    ``reference`` must be binary and constant within each block.
    """
    ref = np.asarray(reference, dtype=np.float64)
    cand = np.asarray(candidate, dtype=np.float64)
    if ref.shape != cand.shape:
        raise ValueError(f"dimension mismatch: {ref.shape} vs {cand.shape}")
    if not np.all((ref == 0) | (ref == 1)):
        raise ValueError("reference image is not binary")
    ref_bits = block_means(ref, block_px)
    if not np.all((ref_bits == 0) | (ref_bits == 1)):
        raise ValueError("reference image is not constant within blocks")
    cand_bits = block_means(cand, block_px) >= 0.5
    return float(np.mean(cand_bits != (ref_bits == 1)))


# -- image files -----------------------------------------------------------

_PGM_HEADER = re.compile(rb"P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s")


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) graymap; returns values scaled to [0, 1]."""
    raw = Path(path).read_bytes()
    m = _PGM_HEADER.match(raw)
    if m is None:
        raise ValueError(f"{path}: not a binary P5 graymap")
    width, height, maxval = (int(g) for g in m.groups())
    if width == 0 or height == 0:
        raise ValueError(f"{path}: zero-size image")
    if not 0 < maxval < 65536:
        raise ValueError(f"{path}: invalid maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = width * height
    body = raw[m.end(): m.end() + n * dtype.itemsize]
    if len(body) != n * dtype.itemsize:
        raise ValueError(f"{path}: truncated pixel data")
    pixels = np.frombuffer(body, dtype=dtype).reshape(height, width)
    return pixels.astype(np.float64) / maxval


def write_pgm(path, image) -> None:
    """Write a 16-bit P5 graymap (maxval 65535) mapping [0, 1] linearly."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("can only write non-empty 2-D images")
    if np.any(img < 0) or np.any(img > 1) or not np.all(np.isfinite(img)):
        raise ValueError("image values must lie in [0, 1]")
    samples = np.rint(img * 65535).astype(">u2")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(samples.tobytes())


def write_png(path, image) -> None:
    """8-bit PNG preview of an image in [0, 1]."""
    img = np.clip(np.asarray(image, dtype=np.float64), 0, 1)
    PILImage.fromarray(np.rint(img * 255).astype(np.uint8)).save(path)


def read_image(path) -> np.ndarray:
    """Read a grayscale image (PGM P5 or PNG) as floats in [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    with open(path, "rb") as f:
        magic = f.read(2)
    if magic == b"P5":
        return read_pgm(path)
    try:
        pil = PILImage.open(path)
        pil.load()
    except (OSError, PILImage.UnidentifiedImageError) as exc:
        raise ValueError(f"{path}: unsupported image format") from exc
    if pil.format != "PNG":
        raise ValueError(f"{path}: unsupported image format {pil.format}")
    if pil.width == 0 or pil.height == 0:
        raise ValueError(f"{path}: zero-size image")
    if pil.mode in ("I;16", "I;16B", "I"):
        return np.asarray(pil, dtype=np.float64) / 65535.0
    return np.asarray(pil.convert("L"), dtype=np.float64) / 255.0


def load_binary_image(path, threshold: float = 0.5) -> np.ndarray:
    """Load a grayscale image and binarize it: 1 where gray >= threshold."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    gray = read_image(path)
    return (gray >= threshold).astype(np.float64)
