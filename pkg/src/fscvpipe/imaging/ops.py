"""Core raster operations: grayscale, resize, blur, pyramids, color spaces.

Convolution edge handling is symmetric (mirror) padding throughout, which is
scipy.ndimage mode="reflect".
"""
from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ..errors import InvalidArgumentError
from .raster import ImageMatrix

PYRAMID_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def to_grayscale(img: ImageMatrix) -> ImageMatrix:
    """Channel mean (r+g+b)/3; single-channel input passes through."""
    if img.channels == 1:
        return img
    return ImageMatrix.from_array(img.pixels.mean(axis=2), clip=True)


def resize_plane(a: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = a.shape[:2]
    if (out_h, out_w) == (h, w):
        return a.copy()
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = ys.astype(np.intp)
    x0 = xs.astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = ys - y0
    fx = xs - x0
    if a.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
    else:
        fy = fy[:, None]
        fx = fx[None, :]
    top = a[y0][:, x0] * (1.0 - fx) + a[y0][:, x1] * fx
    bot = a[y1][:, x0] * (1.0 - fx) + a[y1][:, x1] * fx
    return top * (1.0 - fy) + bot * fy


def resize_bilinear(img: ImageMatrix, width: int, height: int) -> ImageMatrix:
    """Bilinear resample with half-pixel-centre sampling, edge clamped."""
    if width < 1 or height < 1:
        raise InvalidArgumentError(f"target dims must be positive, got {width}x{height}")
    return ImageMatrix.from_array(resize_plane(img.pixels, height, width), clip=True)


def binomial_blur5(a: np.ndarray) -> np.ndarray:
    b = ndimage.correlate1d(a, PYRAMID_KERNEL, axis=0, mode="reflect")
    return ndimage.correlate1d(b, PYRAMID_KERNEL, axis=1, mode="reflect")


def pyramid_planes(a: np.ndarray, levels: int) -> list[np.ndarray]:
    out = [a]
    for _ in range(levels - 1):
        out.append(binomial_blur5(out[-1])[::2, ::2])
    return out


def max_pyramid_levels(height: int, width: int) -> int:
    return max(1, int(math.floor(math.log2(min(height, width)))))


def gaussian_pyramid(img: ImageMatrix, levels: int) -> list[ImageMatrix]:
    """Binomial 5-tap pyramid; level k dims are ceil(dims / 2^k).

    Level 0 is the input itself. ``levels`` counts list entries.
    """
    if img.channels != 1:
        raise InvalidArgumentError("gaussian_pyramid expects a single-channel image")
    if levels < 1:
        raise InvalidArgumentError("levels must be >= 1")
    cap = max_pyramid_levels(img.height, img.width)
    if levels > cap:
        raise InvalidArgumentError(
            f"levels={levels} exceeds log2(min dim) = {cap} for {img.width}x{img.height}"
        )
    return [ImageMatrix.from_array(p, clip=True) for p in pyramid_planes(img.pixels, levels)]


def gaussian_blur(a: np.ndarray, sigma: float) -> np.ndarray:
    return ndimage.gaussian_filter(a, sigma, mode="reflect")


def box_mean3(a: np.ndarray) -> np.ndarray:
    return ndimage.uniform_filter(a, size=3, mode="reflect")


def gabor_kernel(theta: float, size: int = 9, wavelength: float = 5.0,
                 sigma: float = 2.5, gamma: float = 0.8) -> np.ndarray:
    """Real (cosine) Gabor kernel, DC-free, L1-normalized."""
    half = size // 2
    y, x = np.mgrid[-half:half + 1, -half:half + 1].astype(np.float64)
    xr = x * math.cos(theta) + y * math.sin(theta)
    yr = -x * math.sin(theta) + y * math.cos(theta)
    g = np.exp(-(xr ** 2 + (gamma * yr) ** 2) / (2.0 * sigma ** 2))
    g *= np.cos(2.0 * math.pi * xr / wavelength)
    g -= g.mean()  # zero response on flat regions
    s = np.abs(g).sum()
    return g / s if s > 0 else g


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """sRGB [0,1] (h, w, 3) -> CIE Lab (D65 white)."""
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InvalidArgumentError("rgb_to_lab expects an (h, w, 3) array")
    u = np.asarray(rgb, dtype=np.float64)
    lin = np.where(u <= 0.04045, u / 12.92, ((u + 0.055) / 1.055) ** 2.4)
    m = np.array([
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ])
    xyz = lin @ m.T
    white = np.array([0.95047, 1.0, 1.08883])
    t = xyz / white
    delta = 6.0 / 29.0
    f = np.where(t > delta ** 3, np.cbrt(t), t / (3.0 * delta ** 2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab
