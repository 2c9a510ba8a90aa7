"""Cluster-based co-saliency.

Pixels (as Lab triples) are clustered twice: per image, and jointly across
the whole image group. Each cluster earns a weight from three cues —
feature contrast against the other clusters, proximity of its pixels to the
image center, and how evenly its pixels spread across the group — and the
per-pixel cluster weights from both clusterings add up into the map. With a
single image the spread cue is neutral, so the same code serves the plain
saliency entry point.
"""
from __future__ import annotations

import warnings

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import InvalidArgumentError
from ..imaging.ops import resize_plane, rgb_to_lab
from ..imaging.raster import ImageMatrix, SaliencyMap
from .common import CosalParams, DEFAULT_PARAMS, SaliencyParams, minmax01, unit_normalize


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    iters: int = 50,
    max_fit_points: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm with k-means++ seeding.

    Fitting may run on a subsample (``max_fit_points``); the returned labels
    always cover every input point. Returns (centers, labels).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InvalidArgumentError("kmeans expects a non-empty (n, d) array")
    n = pts.shape[0]
    if k < 1:
        raise InvalidArgumentError("k must be >= 1")
    if k > n:
        warnings.warn(f"k={k} exceeds {n} points; clamping", stacklevel=2)
        k = n
    rng = np.random.default_rng(seed)
    if max_fit_points is not None and n > max_fit_points:
        fit = pts[rng.choice(n, size=max_fit_points, replace=False)]
    else:
        fit = pts

    # k-means++ seeding
    centers = np.empty((k, pts.shape[1]))
    centers[0] = fit[rng.integers(len(fit))]
    closest = cdist(fit, centers[:1], "sqeuclidean").ravel()
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            centers[j:] = centers[0]
            break
        centers[j] = fit[rng.choice(len(fit), p=closest / total)]
        closest = np.minimum(closest, cdist(fit, centers[j:j + 1], "sqeuclidean").ravel())

    labels = np.zeros(len(fit), dtype=int)
    for _ in range(iters):
        d2 = cdist(fit, centers, "sqeuclidean")
        labels = d2.argmin(axis=1)
        new_centers = centers.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_centers[j] = fit[members].mean(axis=0)
            else:
                # revive a dead cluster at the worst-explained point
                new_centers[j] = fit[d2.min(axis=1).argmax()]
        if np.allclose(new_centers, centers, atol=1e-10):
            centers = new_centers
            break
        centers = new_centers
    full_labels = cdist(pts, centers, "sqeuclidean").argmin(axis=1)
    return centers, full_labels


def contrast_cue(centers: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Population-weighted feature distance of each cluster from the rest."""
    total = counts.sum()
    dist = cdist(centers, centers)
    return (dist * (counts[None, :] / total)).sum(axis=1)


def spatial_cue(label_maps: list[np.ndarray], k: int) -> np.ndarray:
    """Mean center-proximity of each cluster's pixels (Gaussian falloff)."""
    sums = np.zeros(k)
    counts = np.zeros(k)
    for lm in label_maps:
        h, w = lm.shape
        rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        d2 = (rr - (h - 1) / 2.0) ** 2 + (cc - (w - 1) / 2.0) ** 2
        sigma = np.hypot(h, w) / 4.0
        prox = np.exp(-d2 / (2.0 * sigma * sigma))
        sums += np.bincount(lm.ravel(), weights=prox.ravel(), minlength=k)
        counts += np.bincount(lm.ravel(), minlength=k)
    out = np.zeros(k)
    nonzero = counts > 0
    out[nonzero] = sums[nonzero] / counts[nonzero]
    return out


def correspondence_cue(label_maps: list[np.ndarray], k: int) -> np.ndarray:
    """How evenly each cluster spreads over the group (1 = uniform)."""
    m = len(label_maps)
    if m == 1:
        return np.ones(k)
    per_img = np.stack([np.bincount(lm.ravel(), minlength=k) for lm in label_maps])
    totals = per_img.sum(axis=0)
    out = np.ones(k)
    worst = (m - 1) / (m * m)  # variance when one image holds everything
    for j in range(k):
        if totals[j] == 0:
            out[j] = 0.0
            continue
        q = per_img[:, j] / totals[j]
        out[j] = 1.0 - q.var() / worst
    return out


def _cue_scale(w: np.ndarray) -> np.ndarray:
    spread = w.max() - w.min()
    if spread <= 1e-12:
        return np.ones_like(w) if w.max() > 1e-12 else np.zeros_like(w)
    return minmax01(w)


def _lab_features(img: ImageMatrix, side: int) -> np.ndarray:
    px = img.pixels
    if img.channels == 1:
        px = np.repeat(px[:, :, None], 3, axis=2)
    h, w = px.shape[:2]
    if max(h, w) > side:
        scale = side / max(h, w)
        px = resize_plane(px, max(1, round(h * scale)), max(1, round(w * scale)))
    return rgb_to_lab(px) / 100.0


def _cluster_weights(
    label_maps: list[np.ndarray], centers: np.ndarray, k: int
) -> np.ndarray:
    counts = np.zeros(k)
    for lm in label_maps:
        counts += np.bincount(lm.ravel(), minlength=k)
    w = (
        _cue_scale(contrast_cue(centers, counts))
        * _cue_scale(spatial_cue(label_maps, k))
        * _cue_scale(correspondence_cue(label_maps, k))
    )
    return w


def cosaliency(
    images: list[ImageMatrix], params: SaliencyParams = DEFAULT_PARAMS
) -> list[SaliencyMap]:
    """Co-saliency maps for a group of images (group of one is fine)."""
    if not images:
        raise InvalidArgumentError("cosaliency needs at least one image")
    cp = params.cosal
    feats = [_lab_features(img, cp.working_side) for img in images]
    shapes = [f.shape[:2] for f in feats]
    flat = [f.reshape(-1, 3) for f in feats]

    # per-image layer
    single_maps = []
    for f, shape in zip(flat, shapes):
        k = min(cp.k_single, len(f))
        centers, labels = kmeans(f, k, cp.seed, cp.iters, cp.max_fit_pixels)
        w = _cluster_weights([labels.reshape(shape)], centers, k)
        single_maps.append(w[labels].reshape(shape))

    # joint layer over the whole group
    stacked = np.concatenate(flat, axis=0)
    k = min(cp.k_multi, len(stacked))
    centers, labels = kmeans(stacked, k, cp.seed, cp.iters, cp.max_fit_pixels)
    label_maps = []
    start = 0
    for shape in shapes:
        npix = shape[0] * shape[1]
        label_maps.append(labels[start:start + npix].reshape(shape))
        start += npix
    w = _cluster_weights(label_maps, centers, k)

    out = []
    for img, shape, single, lm in zip(images, shapes, single_maps, label_maps):
        combined = single + w[lm]
        full = resize_plane(combined, img.height, img.width)
        out.append(unit_normalize(full))
    return out


def cosal(img: ImageMatrix, params: SaliencyParams = DEFAULT_PARAMS) -> SaliencyMap:
    return cosaliency([img], params)[0]
