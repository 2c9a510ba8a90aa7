"""Raster value types: images, binary masks, saliency maps.

All pixel data is float64 in [0, 1], shaped (h, w) for single-channel and
(h, w, 3) for RGB. Arrays are locked (non-writeable) after construction;
every operation returns a new object.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import InvalidArgumentError


def _locked(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ImageMatrix:
    """Immutable float image, values in [0, 1], 1 or 3 channels."""

    pixels: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.pixels, dtype=np.float64)
        if a.ndim == 3 and a.shape[2] == 1:
            a = a[:, :, 0]
        if a.ndim not in (2, 3):
            raise InvalidArgumentError(f"image must be 2-D or 3-D, got shape {a.shape}")
        if a.ndim == 3 and a.shape[2] != 3:
            raise InvalidArgumentError(f"color image needs 3 channels, got {a.shape[2]}")
        if a.size == 0:
            raise InvalidArgumentError("image has a zero dimension")
        if not np.isfinite(a).all():
            raise InvalidArgumentError("image contains non-finite values")
        if a.min() < 0.0 or a.max() > 1.0:
            raise InvalidArgumentError(
                f"image values outside [0, 1]: min={a.min():.6g} max={a.max():.6g}"
            )
        object.__setattr__(self, "pixels", _locked(a))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    @classmethod
    def from_array(cls, a: np.ndarray, clip: bool = False) -> "ImageMatrix":
        """Wrap an array; ``clip`` snaps small float excursions into [0, 1]."""
        a = np.asarray(a, dtype=np.float64)
        if clip:
            a = np.clip(a, 0.0, 1.0)
        return cls(a)

    def to_u8(self) -> np.ndarray:
        return np.round(self.pixels * 255.0).astype(np.uint8)

    @classmethod
    def open(cls, path: str | Path) -> "ImageMatrix":
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB" if im.mode not in ("1", "I;16", "I", "F") else "L")
            arr = np.asarray(im, dtype=np.float64) / 255.0
        return cls(arr)

    def save(self, path: str | Path) -> None:
        u8 = self.to_u8()
        Image.fromarray(u8, mode="L" if self.channels == 1 else "RGB").save(path)


@dataclass(frozen=True)
class BinaryMask:
    """Immutable {0,1} mask, shape (h, w). Serializes as 0/255 PNG."""

    values: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.values)
        if a.ndim != 2 or a.size == 0:
            raise InvalidArgumentError(f"mask must be non-empty 2-D, got shape {a.shape}")
        if not np.isin(a, (0, 1)).all():
            raise InvalidArgumentError("mask values must be 0 or 1")
        object.__setattr__(self, "values", _locked(a.astype(np.uint8)))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @classmethod
    def open(cls, path: str | Path) -> "BinaryMask":
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"))
        return cls((arr >= 128).astype(np.uint8))

    def save(self, path: str | Path) -> None:
        Image.fromarray(self.values * np.uint8(255), mode="L").save(path)


@dataclass(frozen=True)
class SaliencyMap:
    """Per-pixel saliency in [0, 1]. ``degenerate`` flags a featureless input.

    Normalized maps have max == 1 unless the map is all zero.
    """

    data: np.ndarray
    degenerate: bool = field(default=False)

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 2 or a.size == 0:
            raise InvalidArgumentError(f"saliency map must be non-empty 2-D, got {a.shape}")
        if not np.isfinite(a).all():
            raise InvalidArgumentError("saliency map contains non-finite values")
        if a.min() < 0.0 or a.max() > 1.0:
            raise InvalidArgumentError("saliency map values outside [0, 1]")
        object.__setattr__(self, "data", _locked(a))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def save(self, path: str | Path) -> None:
        Image.fromarray(np.round(self.data * 255.0).astype(np.uint8), mode="L").save(path)
