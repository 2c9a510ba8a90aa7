"""Non-neural stand-in scorers so fusion and evaluation run end-to-end.

``baseline_score`` is a ridge classifier on 32x32 grayscale features, solved
in its dual (gram) form — cheap for a few thousand samples regardless of
feature width — with a logistic squash so each output sums to 1.
``FoldScorer`` reuses one cached gram matrix across all folds of a variant.
``detect_release_boxes`` is a training-free hot-color peak detector that
plays the role of an object detector: one box with a confidence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .fusion import LABEL_NO_RELEASE, LABEL_RELEASE, DetectionBox, ScoreVector
from .imaging.ops import gaussian_blur, resize_plane, to_grayscale
from .imaging.raster import ImageMatrix

FEATURE_SIDE = 32
_RIDGE = 1.0
_GAIN = 4.0


def image_features(img: ImageMatrix) -> np.ndarray:
    """Flattened 32x32 grayscale downsample."""
    gray = to_grayscale(img).pixels
    return resize_plane(gray, FEATURE_SIDE, FEATURE_SIDE).ravel()


def _targets(labels: list) -> np.ndarray:
    y = np.empty(len(labels))
    for i, lab in enumerate(labels):
        if lab == LABEL_RELEASE:
            y[i] = 1.0
        elif lab == LABEL_NO_RELEASE:
            y[i] = -1.0
        else:
            raise InvalidArgumentError(f"unknown label {lab!r}")
    return y


def _squash(raw: np.ndarray) -> list:
    p = 1.0 / (1.0 + np.exp(-_GAIN * raw))
    return [ScoreVector(float(1.0 - v), float(v)) for v in p]


def baseline_score(train: list, test: list, ridge: float = _RIDGE) -> list:
    """Score test feature vectors against (features, label) training pairs."""
    if not train:
        raise InvalidArgumentError("training set is empty")
    feats, labels = zip(*train)
    y = _targets(list(labels))
    if len(set(labels)) < 2:
        raise InvalidArgumentError("training set contains a single class")
    x = np.asarray(feats, dtype=float)
    t = np.asarray(test, dtype=float)
    if t.ndim == 1:
        t = t[None, :]
    if x.shape[1] != t.shape[1]:
        raise InvalidArgumentError(
            f"feature widths differ: train {x.shape[1]}, test {t.shape[1]}"
        )
    if np.ptp(x) == 0.0:
        return [ScoreVector(0.5, 0.5) for _ in range(len(t))]
    mu = x.mean(axis=0)
    xc = x - mu
    b = y.mean()
    k = xc @ xc.T
    alpha = np.linalg.solve(k + ridge * np.eye(len(x)), y - b)
    raw = (t - mu) @ xc.T @ alpha + b
    return _squash(raw)


@dataclass
class FoldScorer:
    """Cross-validated ridge scoring with one gram matrix per variant.

    Centering and intercept are computed from each fold's training rows
    only, so no statistic of a test fold ever reaches its model.
    """

    features: np.ndarray   # (n, d)
    labels: list
    ridge: float = _RIDGE

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise InvalidArgumentError("features must be (n, d) matching labels")
        self._y = _targets(self.labels)
        self._gram = self.features @ self.features.T

    def score_fold(self, train_idx: np.ndarray, test_idx: np.ndarray) -> list:
        """ScoreVectors for test_idx from a model fit on train_idx."""
        tr = np.asarray(train_idx, dtype=int)
        te = np.asarray(test_idx, dtype=int)
        if np.intersect1d(tr, te).size:
            raise InvalidArgumentError("train and test folds overlap")
        y = self._y[tr]
        if np.unique(y).size < 2:
            raise InvalidArgumentError("training fold contains a single class")
        if np.ptp(self.features[tr]) == 0.0:
            return [ScoreVector(0.5, 0.5) for _ in range(len(te))]
        k_tt = self._gram[np.ix_(tr, tr)]
        k_st = self._gram[np.ix_(te, tr)]
        # center the kernel with training-fold statistics
        row_mean = k_tt.mean(axis=1)
        grand = k_tt.mean()
        kc_tt = k_tt - row_mean[:, None] - row_mean[None, :] + grand
        kc_st = k_st - k_st.mean(axis=1, keepdims=True) - row_mean[None, :] + grand
        b = y.mean()
        alpha = np.linalg.solve(kc_tt + self.ridge * np.eye(len(tr)), y - b)
        return _squash(kc_st @ alpha + b)


# --------------------------------------------------------------------------
# detection stand-in

_Z_MID = 2.9      # warmth contrast where confidence crosses 0.5
_Z_SLOPE = 3.0
_Z_FLOOR = 1.0    # below this nothing is detected at all
_MIN_PROMINENCE = 0.1   # absolute warmth rise; rules out near-flat fields
                        # whose tiny spread would otherwise inflate z


def detect_release_boxes(img: ImageMatrix) -> list:
    """At most one detection around the strongest hot-color peak.

    Warm colors ((r+g)/2 - b) mark the signature this pipeline hunts for;
    confidence grows with how far the warmth peak rises above the image's
    typical warmth. The pre-smoothing radius tracks the image size so the
    statistic behaves alike at full and reduced resolution.
    """
    if img.channels == 3:
        px = img.pixels
        warmth = (px[:, :, 0] + px[:, :, 1]) / 2.0 - px[:, :, 2]
    else:
        warmth = img.pixels
    smooth = gaussian_blur(warmth, max(1.5, min(img.height, img.width) / 60.0))
    med = float(np.median(smooth))
    spread = float(smooth.std())
    if spread <= 1e-12 or float(smooth.max()) - med < _MIN_PROMINENCE:
        return []
    z = (float(smooth.max()) - med) / spread
    if z <= _Z_FLOOR:
        return []
    confidence = 1.0 / (1.0 + math.exp(-_Z_SLOPE * (z - _Z_MID)))
    r, c = np.unravel_index(int(smooth.argmax()), smooth.shape)
    side = max(8, min(img.height, img.width) // 5)
    x = int(min(max(c - side // 2, 0), img.width - side))
    y = int(min(max(r - side // 2, 0), img.height - side))
    return [DetectionBox(x=x, y=y, w=side, h=side, confidence=min(confidence, 1.0))]
