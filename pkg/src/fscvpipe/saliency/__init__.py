"""Saliency detectors and the mask/region products derived from them."""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import EmptyRoiError, InvalidArgumentError
from ..imaging.raster import BinaryMask, ImageMatrix, SaliencyMap
from .common import (
    DEFAULT_PARAMS,
    METHODS,
    CosalParams,
    FeatureMap,
    GbvsParams,
    SaliencyParams,
    SpectralParams,
    WaveletSaliencyParams,
    minmax01,
    unit_normalize,
)
from .cosaliency import cosal, cosaliency
from .gbvs import gbvs, markov_equilibrium
from .maskops import fg_roi, foreground, roi, threshold_mask
from .simpsal import simpsal
from .spectral import spectral_residual
from .wavelet import wavelet_saliency

_DISPATCH = {
    "simpsal": simpsal,
    "gbvs": gbvs,
    "cosal": cosal,
    "spectral": spectral_residual,
    "wavelet": wavelet_saliency,
}


def compute_saliency(
    img: ImageMatrix, method: str, params: SaliencyParams = DEFAULT_PARAMS
) -> SaliencyMap:
    try:
        fn = _DISPATCH[method]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown saliency method {method!r}; choose from {', '.join(METHODS)}"
        ) from None
    return fn(img, params)


@dataclass(frozen=True)
class SaliencyTriplet:
    """One detector's full output set for an image.

    ``fg_roi`` / ``roi`` are None when cropping removed everything (the mask
    had no line with enough foreground), so callers can fall back without
    exception plumbing.
    """

    method: str
    saliency: SaliencyMap
    mask: BinaryMask
    foreground: ImageMatrix
    fg_roi: ImageMatrix | None
    roi: ImageMatrix | None


def saliency_triplet(
    img: ImageMatrix,
    method: str,
    params: SaliencyParams = DEFAULT_PARAMS,
    saliency: SaliencyMap | None = None,
) -> SaliencyTriplet:
    """Compute map, mask, and the three masked crops in one pass.

    ``saliency`` short-circuits the detector when the map is already known
    (e.g. co-saliency computed over a group).
    """
    sal = saliency if saliency is not None else compute_saliency(img, method, params)
    mask = threshold_mask(sal, params.mask_threshold)
    fg = foreground(img, mask)
    col_th = params.roi_line_frac * img.height
    row_th = params.roi_line_frac * img.width
    try:
        fgr = fg_roi(img, mask, col_th, row_th)
    except EmptyRoiError:
        fgr = None
    try:
        r = roi(img, mask, col_th, row_th)
    except EmptyRoiError:
        r = None
    return SaliencyTriplet(method, sal, mask, fg, fgr, r)


__all__ = [
    "METHODS",
    "DEFAULT_PARAMS",
    "SaliencyParams",
    "GbvsParams",
    "CosalParams",
    "SpectralParams",
    "WaveletSaliencyParams",
    "FeatureMap",
    "SaliencyTriplet",
    "compute_saliency",
    "saliency_triplet",
    "cosal",
    "cosaliency",
    "gbvs",
    "markov_equilibrium",
    "simpsal",
    "spectral_residual",
    "wavelet_saliency",
    "threshold_mask",
    "foreground",
    "fg_roi",
    "roi",
    "minmax01",
    "unit_normalize",
]
