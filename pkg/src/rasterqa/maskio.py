"""Mask and logit-plane file formats.

Masks travel as 8-bit single-channel PNGs where any value above 127 is
foreground.  Logit maps are raw little-endian float32 planes, one plane per
class, ordered as in the store manifest entry that describes them (the
sidecar carries model id, class list, and dimensions).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import StoreError
from .fusion import LogitMap
from .raster import BinaryMask

FOREGROUND_THRESHOLD = 127


def read_mask_png(path: str | Path, class_label: str) -> BinaryMask:
    """Load a binary mask from an 8-bit single-channel PNG."""
    img = Image.open(path)
    if img.mode != "L":
        img = img.convert("L")
    data = np.asarray(img) > FOREGROUND_THRESHOLD
    return BinaryMask(class_label, data)


def write_mask_png(mask: np.ndarray, path: str | Path) -> None:
    """Write a boolean array as a 0/255 single-channel PNG."""
    img = Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    img.save(path)


def read_logit_planes(
    path: str | Path,
    model_id: str,
    classes: list[str],
    width: int,
    height: int,
) -> LogitMap:
    """Load raw float32 LE planes (class-major) as a LogitMap."""
    raw = np.fromfile(path, dtype="<f4")
    expected = len(classes) * width * height
    if raw.size != expected:
        raise StoreError(
            f"{path}: expected {expected} float32 values "
            f"({len(classes)} x {height} x {width}), found {raw.size}"
        )
    values = raw.reshape(len(classes), height, width)
    return LogitMap(model_id, list(classes), values)


def write_logit_planes(values: np.ndarray, path: str | Path) -> None:
    """Write (n_classes, height, width) scores as raw float32 LE planes."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    values.astype("<f4").tofile(path)
