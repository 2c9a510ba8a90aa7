"""Binary-mask thresholding and FG / FG-ROI / ROI extraction.

foreground(o, b): per-pixel product of image and mask (background zeroed,
kept pixels unchanged). fg_roi(o, b, th): drop every column whose mask
column-sum falls below the threshold, then every row whose mask row-sum
does (row sums measured on the original mask). roi composes the two:
fg_roi applied to the foreground image.
"""
from __future__ import annotations

import numpy as np

from ..errors import EmptyRoiError, InvalidArgumentError
from ..imaging.raster import BinaryMask, ImageMatrix, SaliencyMap


def threshold_mask(sal: SaliencyMap, t: float) -> BinaryMask:
    """1 where saliency strictly exceeds t."""
    if not 0.0 < t < 1.0:
        raise InvalidArgumentError(f"threshold must lie in (0, 1), got {t}")
    return BinaryMask((sal.data > t).astype(np.uint8))


def _check_dims(img: ImageMatrix, mask: BinaryMask) -> None:
    if (img.height, img.width) != (mask.height, mask.width):
        raise InvalidArgumentError(
            f"image {img.width}x{img.height} and mask {mask.width}x{mask.height} differ"
        )


def foreground(o: ImageMatrix, b: BinaryMask) -> ImageMatrix:
    _check_dims(o, b)
    m = b.values.astype(np.float64)
    if o.channels == 3:
        m = m[:, :, None]
    return ImageMatrix(o.pixels * m)


def _line_keep(mask: np.ndarray, col_th: float, row_th: float) -> tuple[np.ndarray, np.ndarray]:
    col_sums = mask.sum(axis=0)
    row_sums = mask.sum(axis=1)
    keep_cols = np.flatnonzero(~(col_sums < col_th))
    keep_rows = np.flatnonzero(~(row_sums < row_th))
    return keep_rows, keep_cols


def fg_roi(o: ImageMatrix, b: BinaryMask, th: float, row_th: float | None = None) -> ImageMatrix:
    """Crop to mask-supported lines; pixels keep their original values.

    ``th`` applies to column sums; ``row_th`` defaults to ``th``.
    """
    _check_dims(o, b)
    if th < 0 or (row_th is not None and row_th < 0):
        raise InvalidArgumentError("line thresholds must be >= 0")
    keep_rows, keep_cols = _line_keep(b.values.astype(np.int64), th, th if row_th is None else row_th)
    if keep_cols.size == 0:
        raise EmptyRoiError("every column fell below the line threshold")
    if keep_rows.size == 0:
        raise EmptyRoiError("every row fell below the line threshold")
    return ImageMatrix(o.pixels[np.ix_(keep_rows, keep_cols)])


def roi(o: ImageMatrix, b: BinaryMask, th: float, row_th: float | None = None) -> ImageMatrix:
    return fg_roi(foreground(o, b), b, th, row_th)
