"""2-D discrete Fourier transform, unnormalized forward / 1/N inverse."""
from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError


def _check(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.size == 0:
        raise InvalidArgumentError(f"fft2/ifft2 expect a non-empty 2-D matrix, got {a.shape}")
    return a


def fft2(a: np.ndarray) -> np.ndarray:
    """Forward transform; a constant c matrix puts c*h*w in the DC bin."""
    return np.fft.fft2(_check(a))


def ifft2(a: np.ndarray) -> np.ndarray:
    return np.fft.ifft2(_check(a))
