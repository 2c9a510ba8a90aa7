"""Multi-level 2-D discrete wavelet transform (haar, db4).

The input is padded symmetrically so both dims divide by 2^levels, then each
level runs a periodized orthogonal filter bank (periodization keeps the
round trip exact for any even length; the inverse crops back to the original
shape). ``details`` is ordered finest first: details[0] belongs to level 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError

_SQRT2 = float(np.sqrt(2.0))

# Orthonormal scaling (low-pass) filters; sum = sqrt(2).
_FAMILIES: dict[str, np.ndarray] = {
    "haar": np.array([1.0, 1.0]) / _SQRT2,
    # 8-tap Daubechies filter with 4 vanishing moments.
    "db4": np.array([
        0.23037781330885523, 0.7148465705525415,
        0.6308807679295904, -0.02798376941698385,
        -0.18703481171888114, 0.030841381835986965,
        0.032883011666982945, -0.010597401784997278,
    ]),
}


def max_decomposition_levels(height: int, width: int) -> int:
    """Deepest usable level count: each analysis step halves both dims."""
    if height < 1 or width < 1:
        raise InvalidArgumentError("dimensions must be positive")
    return max(1, int(np.floor(np.log2(min(height, width)))))


def wavelet_filters(family: str) -> tuple[np.ndarray, np.ndarray]:
    """Return (low, high) decomposition filters for a supported family."""
    try:
        lo = _FAMILIES[family]
    except KeyError:
        raise InvalidArgumentError(
            f"unsupported wavelet family {family!r}; supported: {sorted(_FAMILIES)}"
        ) from None
    hi = (lo[::-1] * np.where(np.arange(lo.size) % 2 == 0, 1.0, -1.0))
    return lo, hi


def _analyze(x: np.ndarray, filt: np.ndarray, axis: int) -> np.ndarray:
    acc = None
    for m, c in enumerate(filt):
        seg = np.roll(x, -m, axis=axis)
        seg = seg[::2] if axis == 0 else seg[:, ::2]
        acc = c * seg if acc is None else acc + c * seg
    return acc


def _synthesize(coef: np.ndarray, filt: np.ndarray, axis: int) -> np.ndarray:
    shape = list(coef.shape)
    shape[axis] *= 2
    up = np.zeros(shape, dtype=np.float64)
    if axis == 0:
        up[::2] = coef
    else:
        up[:, ::2] = coef
    acc = np.zeros(shape, dtype=np.float64)
    for m, c in enumerate(filt):
        acc += c * np.roll(up, m, axis=axis)
    return acc


def dwt1d(x: np.ndarray, family: str = "haar") -> tuple[np.ndarray, np.ndarray]:
    """One analysis step on a 1-D signal (odd lengths pad symmetrically)."""
    lo, hi = wavelet_filters(family)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InvalidArgumentError("dwt1d expects a non-empty 1-D signal")
    if x.size % 2:
        x = np.pad(x, (0, 1), mode="symmetric")
    row = x[None, :]
    return _analyze(row, lo, 1)[0], _analyze(row, hi, 1)[0]


@dataclass(frozen=True)
class WaveletPyramid:
    family: str
    levels: int
    shape: tuple[int, int]
    approx: np.ndarray
    details: list  # [(lh, hl, hh)] finest first


def dwt2(a: np.ndarray, family: str = "db4", levels: int = 1) -> WaveletPyramid:
    lo, hi = wavelet_filters(family)
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise InvalidArgumentError(f"dwt2 expects a non-empty 2-D matrix, got {a.shape}")
    if levels < 1:
        raise InvalidArgumentError("levels must be >= 1")
    h, w = a.shape
    block = 1 << levels
    pad_h = (-h) % block
    pad_w = (-w) % block
    x = np.pad(a, ((0, pad_h), (0, pad_w)), mode="symmetric") if (pad_h or pad_w) else a
    details = []
    for _ in range(levels):
        low = _analyze(x, lo, 0)
        high = _analyze(x, hi, 0)
        ll = _analyze(low, lo, 1)
        lh = _analyze(low, hi, 1)
        hl = _analyze(high, lo, 1)
        hh = _analyze(high, hi, 1)
        details.append((lh, hl, hh))
        x = ll
    return WaveletPyramid(family, levels, (h, w), x, details)


def _merge(ll, lh, hl, hh, lo, hi) -> np.ndarray:
    low = _synthesize(ll, lo, 1) + _synthesize(lh, hi, 1)
    high = _synthesize(hl, lo, 1) + _synthesize(hh, hi, 1)
    return _synthesize(low, lo, 0) + _synthesize(high, hi, 0)


def idwt2(pyr: WaveletPyramid) -> np.ndarray:
    lo, hi = wavelet_filters(pyr.family)
    x = pyr.approx
    for lh, hl, hh in reversed(pyr.details):
        x = _merge(x, lh, hl, hh, lo, hi)
    h, w = pyr.shape
    return x[:h, :w]


def reconstruct_details(pyr: WaveletPyramid, upto_level: int) -> np.ndarray:
    """Inverse transform keeping only detail levels 1..upto_level (LL zeroed)."""
    if not 1 <= upto_level <= pyr.levels:
        raise InvalidArgumentError(
            f"upto_level must be in 1..{pyr.levels}, got {upto_level}"
        )
    lo, hi = wavelet_filters(pyr.family)
    x = np.zeros_like(pyr.approx)
    for level in range(pyr.levels, 0, -1):
        lh, hl, hh = pyr.details[level - 1]
        if level > upto_level:
            lh = np.zeros_like(lh)
            hl = np.zeros_like(hl)
            hh = np.zeros_like(hh)
        x = _merge(x, lh, hl, hh, lo, hi)
    h, w = pyr.shape
    return x[:h, :w]
