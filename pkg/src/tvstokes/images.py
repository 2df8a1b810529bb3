"""Grayscale image I/O, Gaussian noise and synthetic phantoms."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError


class ImageFormatError(ValueError):
    """Unsupported file type, bit depth or color layout."""


_SUFFIXES = {".png": "PNG", ".pgm": "PPM"}
_MODES = {"L": 255.0, "I;16": 65535.0, "I;16B": 65535.0, "I;16L": 65535.0, "1": 1.0}


def load_image(path) -> np.ndarray:
    """Read an 8- or 16-bit grayscale PNG/PGM as floats in [0, 1]."""
    path = Path(path)
    if path.suffix.lower() not in _SUFFIXES:
        raise ImageFormatError(f"unsupported file type {path.suffix!r}")
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "I" and im.format in ("PNG", "PPM"):
                # Pillow reports 16-bit PNG data as mode I
                arr = np.asarray(im, dtype=np.int64)
                peak = 65535.0
            elif mode in _MODES:
                arr = np.asarray(im)
                peak = _MODES[mode]
            else:
                raise ImageFormatError(f"{path.name}: mode {mode} is not single-channel grayscale")
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from exc
    if arr.ndim != 2:
        raise ImageFormatError(f"{path.name}: expected a single channel")
    return arr.astype(float) / peak


def save_image(field: np.ndarray, path, bits: int = 8) -> None:
    """Clamp to [0, 1], quantize to ``bits`` (8 or 16) and write PNG/PGM by suffix."""
    path = Path(path)
    fmt = _SUFFIXES.get(path.suffix.lower())
    if fmt is None:
        raise ImageFormatError(f"unsupported file type {path.suffix!r}")
    field = np.asarray(field, dtype=float)
    if field.ndim != 2:
        raise ImageFormatError("only scalar fields can be saved as images")
    clipped = np.clip(np.nan_to_num(field, nan=0.0), 0.0, 1.0)
    if bits == 8:
        im = Image.fromarray(np.rint(clipped * 255.0).astype(np.uint8))
    elif bits == 16:
        im = Image.fromarray(np.rint(clipped * 65535.0).astype(np.uint16))
    else:
        raise ImageFormatError(f"bit depth must be 8 or 16, got {bits}")
    im.save(path, format=fmt)


@dataclass(frozen=True)
class NoiseSpec:
    variance: float
    seed: int = 0

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError(f"noise variance must be non-negative, got {self.variance}")


def add_noise(gt: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """``gt`` plus i.i.d. N(0, variance) samples; the result is not clipped."""
    gt = np.asarray(gt, dtype=float)
    if spec.variance == 0:
        return gt.copy()
    rng = np.random.default_rng(spec.seed)
    return gt + rng.normal(0.0, np.sqrt(spec.variance), size=gt.shape)


# --- phantoms ---------------------------------------------------------------------

def disk_stripes(n: int = 64) -> np.ndarray:
    """Bright disk on a striped background, piecewise constant."""
    y, x = np.mgrid[0:n, 0:n] + 0.5
    img = np.where((x // max(n // 8, 1)) % 2 == 0, 0.25, 0.4)
    img[(x - 0.45 * n) ** 2 + (y - 0.5 * n) ** 2 < (0.28 * n) ** 2] = 0.85
    img[(x > 0.7 * n) & (x < 0.9 * n) & (y > 0.1 * n) & (y < 0.3 * n)] = 0.1
    return img


def gradient_edges(n: int = 64) -> np.ndarray:
    """Smooth diagonal ramp with a sharp square and a step edge."""
    y, x = np.mgrid[0:n, 0:n] / max(n - 1, 1)
    img = 0.2 + 0.4 * (x + y) / 2
    img[(x > 0.25) & (x < 0.6) & (y > 0.3) & (y < 0.65)] = 0.9
    img[y > 0.8] -= 0.15
    return np.clip(img, 0.0, 1.0)


PHANTOMS = {"disk-stripes": disk_stripes, "gradient-edges": gradient_edges}


def phantom(name: str, n: int = 64) -> np.ndarray:
    try:
        return PHANTOMS[name](n)
    except KeyError:
        raise ValueError(f"unknown phantom {name!r}; choose from {sorted(PHANTOMS)}") from None
