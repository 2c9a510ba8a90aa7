"""Graph-based saliency via Markov-chain equilibria on a feature lattice.

Each feature channel is resampled to a coarse lattice. A fully connected
graph over the lattice carries edge weights combining feature dissimilarity
with spatial falloff; the stationary distribution of the induced Markov
chain concentrates mass at atypical locations (activation). A second chain,
weighted by the activation itself, sharpens the result (normalization).

Both chains are reversible, so their equilibria have closed forms:

* activation: W is symmetric, so pi is proportional to the row sums of W
* normalization: edge a->b weighted A(b) F(a,b) satisfies detailed balance
  with pi(a) proportional to A(a) * sum_b A(b) F(a,b)

``markov_equilibrium`` still runs power iteration (seeded at the closed
form) so the equilibrium is verified, not assumed.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ..errors import ConvergenceError, InvalidArgumentError
from ..imaging.ops import gabor_kernel, resize_plane
from ..imaging.raster import ImageMatrix, SaliencyMap
from .common import (
    DEFAULT_PARAMS,
    FLAT_RELATIVE_RANGE,
    ZERO_GUARD,
    GbvsParams,
    SaliencyParams,
    unit_normalize,
)
from .simpsal import GABOR_ANGLES, _color_channels

_GABORS = {a: gabor_kernel(math.radians(a)) for a in GABOR_ANGLES}


def lattice_shape(height: int, width: int, params: GbvsParams) -> tuple[int, int]:
    lh = max(2, min(params.lattice_cap, height // params.lattice_divisor))
    lw = max(2, min(params.lattice_cap, width // params.lattice_divisor))
    return lh, lw


def lattice_falloff(lh: int, lw: int, params: GbvsParams) -> np.ndarray:
    """F(a, b) = exp(-dist^2 / (2 sigma^2)) over all lattice node pairs."""
    rows, cols = np.meshgrid(np.arange(lh), np.arange(lw), indexing="ij")
    pts = np.stack([rows.ravel(), cols.ravel()], axis=1).astype(float)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    sigma = params.sigma_frac * lw
    return np.exp(-d2 / (2.0 * sigma * sigma))


def markov_equilibrium(
    transition: np.ndarray,
    tol: float = 1e-7,
    max_iter: int = 10000,
    init: np.ndarray | None = None,
) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix by power iteration."""
    p = np.asarray(transition, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise InvalidArgumentError("transition matrix must be square")
    n = p.shape[0]
    if not np.allclose(p.sum(axis=1), 1.0, atol=1e-9):
        raise InvalidArgumentError("transition matrix rows must sum to 1")
    if init is None:
        pi = np.full(n, 1.0 / n)
    else:
        pi = np.asarray(init, dtype=float)
        if pi.shape != (n,) or pi.min() < 0 or pi.sum() <= 0:
            raise InvalidArgumentError("init must be a nonnegative vector of matching size")
        pi = pi / pi.sum()
    residual = math.inf
    for _ in range(max_iter):
        nxt = pi @ p
        nxt /= nxt.sum()
        residual = float(np.abs(nxt - pi).sum())
        pi = nxt
        if residual < tol:
            return pi
    raise ConvergenceError("markov chain failed to reach equilibrium", residual=residual)


def _is_flat(values: np.ndarray) -> bool:
    peak = float(values.max())
    return peak < ZERO_GUARD or (peak - float(values.min())) <= FLAT_RELATIVE_RANGE * peak


def activation_map(values: np.ndarray, falloff: np.ndarray, params: GbvsParams) -> np.ndarray:
    """Equilibrium of the dissimilarity chain over one lattice channel."""
    m = np.maximum(np.asarray(values, dtype=float).ravel(), params.eps)
    d = np.abs(np.log(m[:, None] / m[None, :]))
    w = d * falloff
    np.fill_diagonal(w, 0.0)
    rowsum = w.sum(axis=1)
    p = w / rowsum[:, None]
    pi = markov_equilibrium(p, params.tol, params.max_iter, init=rowsum)
    return pi.reshape(values.shape)


def normalization_map(activation: np.ndarray, falloff: np.ndarray, params: GbvsParams) -> np.ndarray:
    """Equilibrium of the mass-concentration chain on an activation map."""
    a = np.maximum(np.asarray(activation, dtype=float).ravel(), 0.0)
    w = a[None, :] * falloff
    np.fill_diagonal(w, 0.0)
    rowsum = w.sum(axis=1)
    p = w / rowsum[:, None]
    pi = markov_equilibrium(p, params.tol, params.max_iter, init=a * rowsum)
    return pi.reshape(activation.shape)


def _channels(img: ImageMatrix, lh: int, lw: int) -> list[np.ndarray]:
    i, cr, cg, cb, cy = _color_channels(img)
    small_i = resize_plane(i, lh, lw)
    chans = [
        small_i,
        resize_plane(np.abs(cr - cg), lh, lw),
        resize_plane(np.abs(cb - cy), lh, lw),
    ]
    for a in GABOR_ANGLES:
        chans.append(np.abs(ndimage.correlate(small_i, _GABORS[a], mode="reflect")))
    return chans


def gbvs(img: ImageMatrix, params: SaliencyParams = DEFAULT_PARAMS) -> SaliencyMap:
    gp = params.gbvs
    lh, lw = lattice_shape(img.height, img.width, gp)
    falloff = lattice_falloff(lh, lw, gp)
    acc = np.zeros((lh, lw))
    for chan in _channels(img, lh, lw):
        if _is_flat(chan):
            continue  # no contrast anywhere: the channel has nothing to say
        act = activation_map(chan, falloff, gp)
        acc += normalization_map(act, falloff, gp)
    full = resize_plane(acc, img.height, img.width)
    return unit_normalize(full)


__all__ = [
    "activation_map",
    "gbvs",
    "lattice_falloff",
    "lattice_shape",
    "markov_equilibrium",
    "normalization_map",
]
