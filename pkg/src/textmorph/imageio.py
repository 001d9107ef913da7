"""Lossless image I/O: PNG (8-bit gray or RGB) and PGM in, PNG out.

Lossless formats only; golden hashes depend on byte-stable round trips.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

_ACCEPTED_MODES = {"L", "RGB"}


def load_image(path) -> np.ndarray:
    """Read a PNG or PGM file into a uint8 array, (H, W) or (H, W, 3)."""
    path = Path(path)
    with Image.open(path) as im:
        if im.format not in ("PNG", "PPM"):  # Pillow reports PGM under PPM
            raise ValueError(f"{path}: unsupported format {im.format}; PNG or PGM only")
        if im.mode == "I;16":
            raise ValueError(f"{path}: 16-bit images are not supported")
        if im.mode not in _ACCEPTED_MODES:
            raise ValueError(
                f"{path}: unsupported mode {im.mode}; 8-bit grayscale or RGB only"
            )
        arr = np.asarray(im, dtype=np.uint8)
    if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
        raise ValueError(f"{path}: unexpected image shape {arr.shape}")
    return arr


def save_image(path, arr: np.ndarray) -> None:
    """Write a uint8 array as PNG."""
    path = Path(path)
    a = np.asarray(arr)
    if a.dtype != np.uint8:
        raise ValueError(f"expected uint8 array, got {a.dtype}")
    if a.ndim == 2:
        im = Image.fromarray(a, mode="L")
    elif a.ndim == 3 and a.shape[2] == 3:
        im = Image.fromarray(a, mode="RGB")
    else:
        raise ValueError(f"cannot save image of shape {a.shape}")
    im.save(path, format="PNG")
