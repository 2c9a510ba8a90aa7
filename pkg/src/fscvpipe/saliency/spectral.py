"""Spectral-residual saliency.

The log-amplitude spectrum of natural images is smooth; whatever a 3x3 mean
filter cannot explain (the residual) corresponds to the unexpected parts of
the scene. Inverting the residual with the original phase and smoothing the
squared magnitude yields the saliency map.
"""
from __future__ import annotations

import numpy as np

from ..imaging.fourier import fft2, ifft2
from ..imaging.ops import box_mean3, gaussian_blur, resize_plane, to_grayscale
from ..imaging.raster import ImageMatrix, SaliencyMap
from .common import DEFAULT_PARAMS, SaliencyParams, unit_normalize


def spectral_residual(img: ImageMatrix, params: SaliencyParams = DEFAULT_PARAMS) -> SaliencyMap:
    sp = params.spectral
    gray = to_grayscale(img).pixels
    h, w = gray.shape
    side = sp.working_min_side
    if min(h, w) != side:
        scale = side / min(h, w)
        wh = max(side, round(h * scale))
        ww = max(side, round(w * scale))
        small = resize_plane(gray, wh, ww)
    else:
        small = gray

    spectrum = fft2(small)
    log_amp = np.log(np.abs(spectrum) + sp.eps)
    residual = log_amp - box_mean3(log_amp)
    phase = np.angle(spectrum)
    restored = ifft2(np.exp(residual + 1j * phase))
    sal = gaussian_blur(np.abs(restored) ** 2, sp.blur_sigma)
    return unit_normalize(resize_plane(sal, h, w))
