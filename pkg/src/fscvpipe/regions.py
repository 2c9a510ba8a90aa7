"""Zone cropping and patch extraction.

All geometry is pixel-exact row/column copying — no resampling. The default
geometry targets 875-wide scan images whose release activity sits in rows
320..520; ``ZoneGeometry.scaled`` shrinks every coordinate consistently so
reduced-resolution datasets reuse the same machinery.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .imaging.raster import ImageMatrix


@dataclass(frozen=True)
class ZoneGeometry:
    """Row layout of the scan image and the sliding-window dimensions."""

    width: int = 875
    release_rows: tuple[int, int] = (320, 520)
    head_rows: int = 90
    window: int = 200
    stride: int = 135

    def __post_init__(self):
        lo, hi = self.release_rows
        if not (0 <= lo < hi):
            raise InvalidArgumentError(f"release rows must satisfy 0 <= lo < hi, got {lo}, {hi}")
        if self.head_rows < 1 or self.window < 1 or self.stride < 1 or self.width < 1:
            raise InvalidArgumentError("geometry values must be positive")

    @property
    def common_height(self) -> int:
        return self.release_rows[1] - self.release_rows[0]

    @property
    def concat_height(self) -> int:
        return self.head_rows + self.common_height

    def scaled(self, scale: float) -> "ZoneGeometry":
        if scale <= 0:
            raise InvalidArgumentError("scale must be positive")
        r = lambda v: max(1, round(v * scale))
        return ZoneGeometry(
            width=r(self.width),
            release_rows=(round(self.release_rows[0] * scale), r(self.release_rows[1])),
            head_rows=r(self.head_rows),
            window=r(self.window),
            stride=r(self.stride),
        )


DEFAULT_GEOMETRY = ZoneGeometry()


def _check_zone_input(img: ImageMatrix, geom: ZoneGeometry) -> None:
    if img.height < geom.release_rows[1]:
        raise InvalidArgumentError(
            f"image height {img.height} ends before release rows "
            f"{geom.release_rows[0]}..{geom.release_rows[1]}"
        )
    if img.width != geom.width:
        raise InvalidArgumentError(f"expected width {geom.width}, got {img.width}")


def zone_common(img: ImageMatrix, geom: ZoneGeometry = DEFAULT_GEOMETRY) -> ImageMatrix:
    """The release band: rows [lo, hi) of the image."""
    _check_zone_input(img, geom)
    lo, hi = geom.release_rows
    return ImageMatrix(img.pixels[lo:hi])


def zone_concat(img: ImageMatrix, geom: ZoneGeometry = DEFAULT_GEOMETRY) -> ImageMatrix:
    """Head rows [0, head) stacked directly above the release band."""
    _check_zone_input(img, geom)
    if img.height < geom.head_rows:
        raise InvalidArgumentError(
            f"image height {img.height} shorter than head rows {geom.head_rows}"
        )
    lo, hi = geom.release_rows
    return ImageMatrix(np.concatenate([img.pixels[: geom.head_rows], img.pixels[lo:hi]], axis=0))


@dataclass(frozen=True)
class PatchSet:
    """Patches cut from one zone image, each with its column offset."""

    source_id: str
    patches: list  # [(ImageMatrix, x_offset)]
    mode: str

    def __post_init__(self):
        if self.mode not in ("manual", "automatic"):
            raise InvalidArgumentError(f"mode must be manual or automatic, got {self.mode!r}")
        if not self.patches:
            raise InvalidArgumentError("a patch set cannot be empty")
        dims = {(p.height, p.width) for p, _ in self.patches}
        if len(dims) != 1:
            raise InvalidArgumentError(f"patches must share dimensions, got {sorted(dims)}")
        offsets = [off for _, off in self.patches]
        if self.mode == "automatic" and offsets != sorted(offsets):
            raise InvalidArgumentError("automatic patch offsets must ascend")

    @property
    def offsets(self) -> list:
        return [off for _, off in self.patches]


def manual_patch(zone: ImageMatrix, peak_x: int, size: int) -> ImageMatrix:
    """A size-wide crop centered on peak_x, shifted inward at the borders."""
    if zone.height != size:
        raise InvalidArgumentError(f"zone height {zone.height} must equal patch size {size}")
    if zone.width < size:
        raise InvalidArgumentError(f"zone width {zone.width} narrower than patch size {size}")
    if not 0 <= peak_x < zone.width:
        raise InvalidArgumentError(f"peak_x {peak_x} outside zone width {zone.width}")
    left = min(max(peak_x - size // 2, 0), zone.width - size)
    return ImageMatrix(zone.pixels[:, left:left + size])


def auto_patches(
    zone: ImageMatrix,
    window_w: int = 200,
    stride: int = 135,
    source_id: str = "",
) -> PatchSet:
    """Slide a window across the zone; geometry must tile exactly."""
    if window_w < 1 or stride < 1:
        raise InvalidArgumentError("window and stride must be positive")
    if zone.width < window_w:
        raise InvalidArgumentError(f"zone width {zone.width} narrower than window {window_w}")
    leftover = (zone.width - window_w) % stride
    if leftover:
        raise InvalidArgumentError(
            f"window {window_w} with stride {stride} leaves {leftover} leftover pixels "
            f"on a {zone.width}-wide zone; there are no pixels leftover in a valid layout"
        )
    patches = [
        (ImageMatrix(zone.pixels[:, off:off + window_w]), off)
        for off in range(0, zone.width - window_w + 1, stride)
    ]
    return PatchSet(source_id=source_id, patches=patches, mode="automatic")


def pad_to_square(patch: ImageMatrix, size: int) -> ImageMatrix:
    """Append black columns on the right until the patch is size x size."""
    if patch.height != size:
        raise InvalidArgumentError(f"patch height {patch.height} must equal {size}")
    if patch.width > size:
        raise InvalidArgumentError(f"patch width {patch.width} exceeds {size}")
    if patch.width == size:
        return patch
    pad = size - patch.width
    widths = ((0, 0), (0, pad)) if patch.channels == 1 else ((0, 0), (0, pad), (0, 0))
    return ImageMatrix(np.pad(patch.pixels, widths))
