"""Image preprocessing: top crop, re-centering, resize, RGB stacking.

The top crop removes burned-in header text common in clinical scans; the
remainder is center-cropped square and resized to the model's input side.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


def top_crop_box(height: int, crop_fraction: float) -> tuple[int, int]:
    """Row range [start, stop) kept after removing the top fraction."""
    start = int(height * crop_fraction)
    return start, height


def prepare(image: Image.Image, crop_fraction: float, side: int) -> np.ndarray:
    """(3, side, side) float32 tensor data, normalized, RGB-replicated."""
    image = image.convert("RGB")
    width, height = image.size
    start, stop = top_crop_box(height, crop_fraction)
    image = image.crop((0, start, width, stop))

    # re-center: largest centered square of the remaining area
    width, height = image.size
    square = min(width, height)
    left = (width - square) // 2
    top = (height - square) // 2
    image = image.crop((left, top, left + square, top + square))
    image = image.resize((side, side), Image.BILINEAR)

    array = np.asarray(image, dtype=np.float32) / 255.0
    array = (array - IMAGENET_MEAN) / IMAGENET_STD
    return np.ascontiguousarray(array.transpose(2, 0, 1))
