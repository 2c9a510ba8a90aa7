from .raster import BinaryMask, ImageMatrix, SaliencyMap
from .ops import (
    gaussian_blur,
    gaussian_pyramid,
    gabor_kernel,
    max_pyramid_levels,
    resize_bilinear,
    rgb_to_lab,
    to_grayscale,
)
from .fourier import fft2, ifft2
from .wavelets import (
    WaveletPyramid,
    dwt1d,
    dwt2,
    idwt2,
    max_decomposition_levels,
    reconstruct_details,
    wavelet_filters,
)

__all__ = [
    "BinaryMask", "ImageMatrix", "SaliencyMap",
    "gaussian_blur", "gaussian_pyramid", "gabor_kernel", "max_pyramid_levels",
    "resize_bilinear", "rgb_to_lab", "to_grayscale",
    "fft2", "ifft2",
    "WaveletPyramid", "dwt1d", "dwt2", "idwt2", "max_decomposition_levels",
    "reconstruct_details", "wavelet_filters",
]
