"""Multi-scale center-surround saliency (intensity, color opponency, Gabor).

42 feature maps: centers c in {2,3,4}, surrounds c+delta with delta in {3,4}
(clamped to the deepest pyramid level), giving 6 maps for intensity, 6 each
for the red/green and blue/yellow opponency pairs, and 6 per Gabor angle.
Each map passes the max-normalization operator N(.), everything is added
across scales at scale 4 into three conspicuity maps, and their normalized
mean is the saliency map.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ..errors import InvalidArgumentError
from ..imaging.ops import gabor_kernel, max_pyramid_levels, pyramid_planes, resize_plane
from ..imaging.raster import ImageMatrix, SaliencyMap
from .common import DEFAULT_PARAMS, FeatureMap, SaliencyParams, minmax01, unit_normalize

MIN_SIDE = 64
CENTER_SCALES = (2, 3, 4)
SURROUND_DELTAS = (3, 4)
TARGET_SCALE = 4
GABOR_ANGLES = (0, 45, 90, 135)

_KERNELS = {a: gabor_kernel(math.radians(a)) for a in GABOR_ANGLES}


def _avg_block_max(m: np.ndarray) -> float:
    h, w = m.shape
    bs = max(2, min(h, w) // 8)
    maxima = [
        m[i:i + bs, j:j + bs].max()
        for i in range(0, h, bs)
        for j in range(0, w, bs)
    ]
    return float(np.mean(maxima))


def itti_normalize(m: np.ndarray) -> np.ndarray:
    """N(.): stretch to [0, 1], then weight by (1 - mean local max)^2."""
    m = minmax01(m)
    if m.max() <= 0.0:
        return m
    return m * (1.0 - _avg_block_max(m)) ** 2


def _color_channels(img: ImageMatrix):
    px = img.pixels
    if img.channels == 1:
        r = g = b = px
    else:
        r, g, b = px[:, :, 0], px[:, :, 1], px[:, :, 2]
    i = (r + g + b) / 3.0
    peak = i.max()
    # hue is meaningless at very low luminance; gate at a tenth of the peak
    gate = i > peak / 10.0 if peak > 0 else np.zeros(i.shape, dtype=bool)
    denom = np.where(gate, i, 1.0)
    rn = np.where(gate, r / denom, 0.0)
    gn = np.where(gate, g / denom, 0.0)
    bn = np.where(gate, b / denom, 0.0)
    cr = np.maximum(rn - (gn + bn) / 2.0, 0.0)
    cg = np.maximum(gn - (rn + bn) / 2.0, 0.0)
    cb = np.maximum(bn - (rn + gn) / 2.0, 0.0)
    cy = np.maximum((rn + gn) / 2.0 - np.abs(rn - gn) / 2.0 - bn, 0.0)
    return i, cr, cg, cb, cy


def _cs(center: np.ndarray, surround: np.ndarray) -> np.ndarray:
    return np.abs(center - resize_plane(surround, center.shape[0], center.shape[1]))


def feature_maps(img: ImageMatrix, params: SaliencyParams = DEFAULT_PARAMS) -> list[FeatureMap]:
    """The 42 center-surround feature maps for any valid input."""
    if min(img.height, img.width) < MIN_SIDE:
        raise InvalidArgumentError(
            f"image {img.width}x{img.height} too small for the multi-scale pyramid "
            f"(min side {MIN_SIDE})"
        )
    levels = min(9, max_pyramid_levels(img.height, img.width))
    i, cr, cg, cb, cy = _color_channels(img)
    pyr = {name: pyramid_planes(ch, levels)
           for name, ch in (("i", i), ("r", cr), ("g", cg), ("b", cb), ("y", cy))}
    orient: dict[int, list] = {a: [None] * levels for a in GABOR_ANGLES}
    for lvl in range(CENTER_SCALES[0], levels):
        for a in GABOR_ANGLES:
            orient[a][lvl] = np.abs(
                ndimage.correlate(pyr["i"][lvl], _KERNELS[a], mode="reflect")
            )

    pairs = [(c, min(c + d, levels - 1)) for c in CENTER_SCALES for d in SURROUND_DELTAS]
    maps: list[FeatureMap] = []
    for c, s in pairs:
        maps.append(FeatureMap(_cs(pyr["i"][c], pyr["i"][s]), "intensity", c))
    for c, s in pairs:
        rg_c = pyr["r"][c] - pyr["g"][c]
        rg_s = pyr["g"][s] - pyr["r"][s]
        maps.append(FeatureMap(_cs(rg_c, rg_s), "color-rg", c))
    for c, s in pairs:
        by_c = pyr["b"][c] - pyr["y"][c]
        by_s = pyr["y"][s] - pyr["b"][s]
        maps.append(FeatureMap(_cs(by_c, by_s), "color-by", c))
    for a in GABOR_ANGLES:
        for c, s in pairs:
            maps.append(FeatureMap(_cs(orient[a][c], orient[a][s]), f"orient-{a}", c))
    return maps


def simpsal(img: ImageMatrix, params: SaliencyParams = DEFAULT_PARAMS) -> SaliencyMap:
    maps = feature_maps(img, params)
    th = -(-img.height // (1 << TARGET_SCALE))
    tw = -(-img.width // (1 << TARGET_SCALE))

    def across_scale(group: list[FeatureMap]) -> np.ndarray:
        acc = np.zeros((th, tw))
        for fm in group:
            acc += resize_plane(itti_normalize(fm.values), th, tw)
        return acc

    cons_i = across_scale([m for m in maps if m.channel == "intensity"])
    cons_c = across_scale([m for m in maps if m.channel.startswith("color-")])
    cons_o = np.zeros((th, tw))
    for a in GABOR_ANGLES:
        cons_o += itti_normalize(across_scale([m for m in maps if m.channel == f"orient-{a}"]))

    small = (itti_normalize(cons_i) + itti_normalize(cons_c) + itti_normalize(cons_o)) / 3.0
    return unit_normalize(resize_plane(small, img.height, img.width))
