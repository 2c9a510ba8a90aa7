"""Wavelet-detail saliency.

Band-pass energy at several scales, taken per color-opponent channel, acts
as the feature bank: for each channel and each scale k the inverse transform
of the detail coefficients at scales 1..k (approximation zeroed) is squared
into a feature map. The per-pixel maximum gives a local measure; the
Mahalanobis distance of each pixel's feature vector from the image mean
gives a global one. Their product, exponentially stretched and smoothed, is
the saliency map.
"""
from __future__ import annotations

import numpy as np

from ..imaging.ops import gaussian_blur, rgb_to_lab
from ..imaging.raster import ImageMatrix, SaliencyMap
from ..imaging.wavelets import dwt2, max_decomposition_levels, reconstruct_details
from .common import DEFAULT_PARAMS, SaliencyParams, minmax01, unit_normalize


def _feature_channels(img: ImageMatrix) -> list[np.ndarray]:
    if img.channels == 1:
        return [img.pixels]
    lab = rgb_to_lab(img.pixels)
    return [lab[:, :, k] / 100.0 for k in range(3)]


def wavelet_saliency(img: ImageMatrix, params: SaliencyParams = DEFAULT_PARAMS) -> SaliencyMap:
    wp = params.wavelet
    levels = min(wp.levels, max_decomposition_levels(img.height, img.width))
    feats: list[np.ndarray] = []
    for chan in _feature_channels(img):
        pyr = dwt2(chan, wp.family, levels)
        for upto in range(1, levels + 1):
            feats.append(reconstruct_details(pyr, upto) ** 2)

    stack = np.stack(feats, axis=-1)          # (h, w, n_features)
    local = stack.max(axis=-1)

    x = stack.reshape(-1, stack.shape[-1])
    mu = x.mean(axis=0)
    cov = np.cov(x, rowvar=False)
    cov = np.atleast_2d(cov) + wp.ridge * np.eye(x.shape[1])
    delta = x - mu
    sol = np.linalg.solve(cov, delta.T)
    mahal = np.einsum("ij,ji->i", delta, sol).reshape(local.shape)

    combined = minmax01(local) * minmax01(mahal)
    stretched = np.expm1(combined)
    return unit_normalize(gaussian_blur(stretched, wp.enhance_sigma))
