"""Score-level ensemble machinery: sum rule, patch max rule, detector logic.

Score vectors carry (no_release, release) class scores. Individual scorers
emit vectors summing to 1; fused vectors sum to the member count. Summation
uses math.fsum so member order can never change a fused byte.

CSV formats (UTF-8, header row):
  scores:      sample_id,score_no_release,score_release[,fold]
  detections:  sample_id,x,y,w,h,confidence   (absent id = nothing detected)

Patch-level score rows are keyed "<sample_id>.p<offset>" and collapse to one
row per sample via the max rule before fusion.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataIntegrityError, IngestionError, InvalidArgumentError

LABEL_RELEASE = "release"
LABEL_NO_RELEASE = "no-release"
BACKGROUNDS = ("A", "B", "C")

GLOBAL_METHODS = ("orig", "zone-common", "zone-concat")
PATCH_METHODS = ("patch-200", "patch-290")
SALIENCY_ALGS = ("simpsal", "gbvs", "cosal", "spectral", "wavelet")
SALIENCY_VARIANTS = ("fg", "fgroi", "roi")
SALIENCY_METHODS = tuple(f"{a}-{v}" for a in SALIENCY_ALGS for v in SALIENCY_VARIANTS)
CNN_METHODS = GLOBAL_METHODS + PATCH_METHODS + SALIENCY_METHODS  # 20 per background
DETECTOR_METHOD = "detector"


@dataclass(frozen=True)
class ScoreVector:
    no_release: float
    release: float

    def __post_init__(self):
        for name in ("no_release", "release"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise InvalidArgumentError(f"{name} must be finite and >= 0, got {v}")

    @property
    def label(self) -> str:
        # ties go to the negative class
        return LABEL_RELEASE if self.release > self.no_release else LABEL_NO_RELEASE


@dataclass(frozen=True)
class DetectionBox:
    x: float
    y: float
    w: float
    h: float
    confidence: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise InvalidArgumentError(f"box dims must be positive, got {self.w}x{self.h}")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidArgumentError(f"confidence must lie in [0, 1], got {self.confidence}")


def sum_fuse(scores: list[ScoreVector]) -> ScoreVector:
    if not scores:
        raise InvalidArgumentError("cannot fuse an empty score list")
    return ScoreVector(
        math.fsum(s.no_release for s in scores),
        math.fsum(s.release for s in scores),
    )


def max_rule_patches(patch_scores: list[ScoreVector]) -> ScoreVector:
    """The whole vector of the patch most confident about a release.

    Callers pass patches ordered by window offset; on a tie the earliest
    (lowest-offset) patch wins.
    """
    if not patch_scores:
        raise InvalidArgumentError("cannot apply the max rule to an empty patch list")
    best = patch_scores[0]
    for s in patch_scores[1:]:
        if s.release > best.release:
            best = s
    return best


def detector_decision(boxes: list[DetectionBox], threshold: float = 0.5) -> str:
    if not 0.0 <= threshold <= 1.0:
        raise InvalidArgumentError(f"threshold must lie in [0, 1], got {threshold}")
    if not boxes:
        return LABEL_NO_RELEASE
    top = max(boxes, key=lambda b: b.confidence)
    return LABEL_RELEASE if top.confidence > threshold else LABEL_NO_RELEASE


def detector_to_scores(boxes: list[DetectionBox]) -> ScoreVector:
    """Map detections onto a score vector so detectors can join the sum rule."""
    release = max((b.confidence for b in boxes), default=0.0)
    return ScoreVector(1.0 - release, release)


# --------------------------------------------------------------------------
# ensemble composition

@dataclass(frozen=True)
class EnsembleMember:
    method_id: str
    background: str
    score_source: str  # "scores" (classifier CSV) or "detector" (boxes CSV)

    def __post_init__(self):
        if self.background not in BACKGROUNDS:
            raise InvalidArgumentError(f"background must be one of {BACKGROUNDS}")
        if self.score_source not in ("scores", "detector"):
            raise InvalidArgumentError(f"unknown score source {self.score_source!r}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.method_id, self.background)


@dataclass(frozen=True)
class EnsembleConfig:
    name: str
    members: tuple
    fusion: str = "sum"

    def __post_init__(self):
        if self.fusion != "sum":
            raise InvalidArgumentError(f"only sum fusion is supported, got {self.fusion!r}")
        if not self.members:
            raise InvalidArgumentError("an ensemble needs at least one member")
        keys = [m.key for m in self.members]
        if len(set(keys)) != len(keys):
            dupes = sorted({k for k in keys if keys.count(k) > 1})
            raise InvalidArgumentError(f"duplicate ensemble members: {dupes}")


def _cnn(method: str, bg: str) -> EnsembleMember:
    return EnsembleMember(method, bg, "scores")


def standard_ensembles(backgrounds: tuple = BACKGROUNDS) -> dict:
    """The named member rosters whose sizes are 1/3/9/6/3/15/60/63."""
    first = backgrounds[0]
    singles = {
        "original": [_cnn("orig", first)],
        "global": [_cnn(m, first) for m in GLOBAL_METHODS],
        "global-allbg": [_cnn(m, bg) for bg in backgrounds for m in GLOBAL_METHODS],
        "patch-allbg": [_cnn(m, bg) for bg in backgrounds for m in PATCH_METHODS],
        "detector-allbg": [
            EnsembleMember(DETECTOR_METHOD, bg, "detector") for bg in backgrounds
        ],
        "saliency": [_cnn(m, first) for m in SALIENCY_METHODS],
        "cnn-allbg": [_cnn(m, bg) for bg in backgrounds for m in CNN_METHODS],
    }
    singles["all-methods"] = singles["cnn-allbg"] + singles["detector-allbg"]
    return {
        name: EnsembleConfig(name, tuple(members)) for name, members in singles.items()
    }


# --------------------------------------------------------------------------
# score tables and CSV formats

@dataclass
class ScoreTable:
    """Per-sample score vectors with optional fold provenance per row."""

    scores: dict = field(default_factory=dict)      # sample_id -> ScoreVector
    folds: dict | None = None                        # sample_id -> int, if recorded


def read_scores_csv(path: str | Path) -> ScoreTable:
    path = Path(path)
    table = ScoreTable()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        required = {"sample_id", "score_no_release", "score_release"}
        if not required.issubset(cols):
            raise IngestionError(f"{path.name}: score CSV needs columns {sorted(required)}, got {cols}")
        has_fold = "fold" in cols
        if has_fold:
            table.folds = {}
        for i, row in enumerate(reader, start=2):
            sid = row["sample_id"]
            if sid in table.scores:
                raise IngestionError(f"duplicate sample_id {sid!r}", row=i)
            try:
                table.scores[sid] = ScoreVector(
                    float(row["score_no_release"]), float(row["score_release"])
                )
            except (TypeError, ValueError) as exc:
                raise IngestionError(f"bad score values: {exc}", row=i) from None
            if has_fold:
                table.folds[sid] = int(row["fold"])
    return table


def write_scores_csv(path: str | Path, table: ScoreTable) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = ["sample_id", "score_no_release", "score_release"]
        if table.folds is not None:
            header.append("fold")
        w.writerow(header)
        for sid in sorted(table.scores):
            s = table.scores[sid]
            row = [sid, repr(s.no_release), repr(s.release)]
            if table.folds is not None:
                row.append(table.folds[sid])
            w.writerow(row)


def read_detections_csv(path: str | Path) -> dict:
    """sample_id -> [DetectionBox]; samples without rows simply don't appear."""
    path = Path(path)
    out: dict = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        required = {"sample_id", "x", "y", "w", "h", "confidence"}
        if not required.issubset(cols):
            raise IngestionError(f"{path.name}: detection CSV needs columns {sorted(required)}")
        for i, row in enumerate(reader, start=2):
            try:
                box = DetectionBox(
                    float(row["x"]), float(row["y"]),
                    float(row["w"]), float(row["h"]),
                    float(row["confidence"]),
                )
            except (TypeError, ValueError, InvalidArgumentError) as exc:
                raise IngestionError(f"bad detection row: {exc}", row=i) from None
            out.setdefault(row["sample_id"], []).append(box)
    return out


def write_detections_csv(path: str | Path, detections: dict) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "x", "y", "w", "h", "confidence"])
        for sid in sorted(detections):
            for b in detections[sid]:
                w.writerow([sid, repr(b.x), repr(b.y), repr(b.w), repr(b.h), repr(b.confidence)])


def recording_id(sample_id: str, background: str) -> str:
    """Strip the trailing background tag so members can be joined per recording."""
    suffix = f"_{background}"
    return sample_id[: -len(suffix)] if sample_id.endswith(suffix) else sample_id


def collapse_patch_scores(table: ScoreTable) -> ScoreTable:
    """Max-rule reduction of "<sample_id>.p<offset>" rows to one per sample."""
    groups: dict = {}
    for key in table.scores:
        sid, sep, offset = key.rpartition(".p")
        if not sep or not offset.isdigit():
            raise IngestionError(f"patch score row {key!r} lacks a .p<offset> suffix")
        groups.setdefault(sid, []).append((int(offset), key))
    out = ScoreTable(folds=None if table.folds is None else {})
    for sid, entries in groups.items():
        entries.sort()
        out.scores[sid] = max_rule_patches([table.scores[k] for _, k in entries])
        if table.folds is not None:
            fold_values = {table.folds[k] for _, k in entries}
            if len(fold_values) != 1:
                raise IngestionError(f"patches of {sid!r} disagree on fold: {sorted(fold_values)}")
            out.folds[sid] = fold_values.pop()
    return out


@dataclass(frozen=True)
class FusedPrediction:
    recording: str
    vector: ScoreVector
    label: str


def run_ensemble(config: EnsembleConfig, member_scores: dict) -> list:
    """Fuse per-recording vectors across every member of the config.

    ``member_scores`` maps member.key -> {recording_id -> ScoreVector};
    patch members must already be collapsed. Every member must cover every
    recording seen anywhere in the ensemble.
    """
    for m in config.members:
        if m.key not in member_scores:
            raise DataIntegrityError(f"no scores supplied for member {m.key}")
    recordings: set = set()
    for m in config.members:
        recordings.update(member_scores[m.key])
    results = []
    for rec in sorted(recordings):
        vectors = []
        for m in config.members:
            try:
                vectors.append(member_scores[m.key][rec])
            except KeyError:
                raise DataIntegrityError(
                    f"member {m.key} has no score for recording {rec!r}"
                ) from None
        fused = sum_fuse(vectors)
        results.append(FusedPrediction(rec, fused, fused.label))
    return results
