"""Shared saliency parameters, normalization helpers, feature-map type."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgumentError
from ..imaging.raster import SaliencyMap

# Relative range below which a raw map counts as featureless and is zeroed.
# Numerical ripple on truly featureless inputs peaks near 3e-3 (spectral
# path); structured maps sit orders of magnitude above 1e-2.
FLAT_RELATIVE_RANGE = 1e-2
ZERO_GUARD = 1e-12

METHODS = ("simpsal", "gbvs", "cosal", "spectral", "wavelet")


@dataclass(frozen=True)
class GbvsParams:
    lattice_cap: int = 24          # max lattice edge (nodes per side)
    lattice_divisor: int = 4       # lattice = image dims / divisor, capped
    sigma_frac: float = 0.125      # falloff sigma = lattice width * sigma_frac
    eps: float = 1e-4              # floor for map values inside log ratios
    tol: float = 1e-7
    max_iter: int = 10000


@dataclass(frozen=True)
class CosalParams:
    k_single: int = 6
    k_multi: int = 10
    working_side: int = 128        # clustering runs at this max side
    seed: int = 0
    max_fit_pixels: int = 20000    # k-means fit subsample cap
    iters: int = 50


@dataclass(frozen=True)
class SpectralParams:
    working_min_side: int = 64
    eps: float = 1e-8
    blur_sigma: float = 2.5


@dataclass(frozen=True)
class WaveletSaliencyParams:
    levels: int = 5                # clamped to image capacity
    family: str = "db4"
    ridge: float = 1e-6
    enhance_sigma: float = 2.0


@dataclass(frozen=True)
class SaliencyParams:
    """Knobs for map computation and mask/ROI extraction."""

    mask_threshold: float = 0.5
    roi_line_frac: float = 0.01    # TH = frac * line length
    gbvs: GbvsParams = field(default_factory=GbvsParams)
    cosal: CosalParams = field(default_factory=CosalParams)
    spectral: SpectralParams = field(default_factory=SpectralParams)
    wavelet: WaveletSaliencyParams = field(default_factory=WaveletSaliencyParams)

    def __post_init__(self):
        if not 0.0 < self.mask_threshold < 1.0:
            raise InvalidArgumentError(
                f"mask_threshold must lie in (0, 1), got {self.mask_threshold}"
            )
        if self.roi_line_frac < 0.0:
            raise InvalidArgumentError("roi_line_frac must be >= 0")


DEFAULT_PARAMS = SaliencyParams()


@dataclass(frozen=True)
class FeatureMap:
    """A single early-vision feature map with its channel tag and scale."""

    values: np.ndarray
    channel: str
    scale: int


def minmax01(a: np.ndarray) -> np.ndarray:
    """Stretch to [0, 1]; a flat array maps to zeros."""
    lo = float(a.min())
    hi = float(a.max())
    if hi - lo <= ZERO_GUARD:
        return np.zeros_like(a, dtype=np.float64)
    return (a - lo) / (hi - lo)


def unit_normalize(raw: np.ndarray) -> SaliencyMap:
    """Divide a non-negative map by its max; zero out featureless maps.

    A map whose max is below the zero guard, or whose relative range
    (max-min)/max is below FLAT_RELATIVE_RANGE, carries no usable contrast:
    it is emitted as all zeros with the degenerate flag set.
    """
    raw = np.asarray(raw, dtype=np.float64)
    hi = float(raw.max())
    lo = float(raw.min())
    if hi < ZERO_GUARD or (hi - lo) <= FLAT_RELATIVE_RANGE * hi:
        return SaliencyMap(np.zeros_like(raw), degenerate=True)
    return SaliencyMap(np.clip(raw / hi, 0.0, 1.0))
