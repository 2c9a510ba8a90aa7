"""Grouped cross-validation plans and the binary-classification metric suite.

Grouping unit is the experiment: every sample of an experiment lands in the
same fold, so no recording can leak between train and test. Score tables fed
into ``cross_validated_run`` must carry fold provenance (which fold each
score's model held out); the run refuses tables that disagree with the plan.
"""
from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DataIntegrityError,
    InvalidArgumentError,
    ProtocolViolationError,
    UndefinedMetricError,
)
from .fusion import (
    LABEL_NO_RELEASE,
    LABEL_RELEASE,
    EnsembleConfig,
    FusedPrediction,
    recording_id,
    run_ensemble,
)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: dict  # experiment_id -> fold index

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgumentError(f"fold count must be >= 1, got {self.k}")
        if not self.assignment:
            raise InvalidArgumentError("a fold plan cannot be empty")
        for exp, fold in self.assignment.items():
            if not 0 <= fold < self.k:
                raise InvalidArgumentError(
                    f"experiment {exp!r} assigned to fold {fold}, outside 0..{self.k - 1}"
                )

    def fold_of(self, experiment_id: str) -> int:
        try:
            return self.assignment[experiment_id]
        except KeyError:
            raise ProtocolViolationError(
                f"experiment {experiment_id!r} missing from the fold plan"
            ) from None

    def save(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["experiment_id", "fold"])
            for exp in sorted(self.assignment):
                w.writerow([exp, self.assignment[exp]])

    @classmethod
    def load(cls, path: str | Path) -> "FoldPlan":
        assignment: dict = {}
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if set(reader.fieldnames or []) < {"experiment_id", "fold"}:
                raise ProtocolViolationError("fold plan CSV needs columns experiment_id,fold")
            for i, row in enumerate(reader, start=2):
                exp = row["experiment_id"]
                try:
                    fold = int(row["fold"])
                except (TypeError, ValueError):
                    raise ProtocolViolationError(f"row {i}: fold must be an integer") from None
                if exp in assignment and assignment[exp] != fold:
                    raise ProtocolViolationError(
                        f"row {i}: experiment {exp!r} mapped to folds "
                        f"{assignment[exp]} and {fold}"
                    )
                assignment[exp] = fold
        if not assignment:
            raise ProtocolViolationError("fold plan CSV contains no assignments")
        return cls(k=max(assignment.values()) + 1, assignment=assignment)


def grouped_kfold(samples: list, k: int = 10, seed: int = 0) -> FoldPlan:
    """Assign experiments to folds, balancing fold sizes greedily.

    Experiments are shuffled (seeded), then stably ordered by descending
    sample count; each goes to the currently smallest fold (lowest index on
    ties). ``samples`` needs only an ``experiment_id`` attribute.
    """
    if k < 1:
        raise InvalidArgumentError(f"fold count must be >= 1, got {k}")
    counts: dict = {}
    for s in samples:
        counts[s.experiment_id] = counts.get(s.experiment_id, 0) + 1
    if len(counts) < k:
        raise InvalidArgumentError(
            f"{len(counts)} distinct experiments cannot fill {k} folds"
        )
    order = sorted(counts)
    random.Random(seed).shuffle(order)
    order.sort(key=lambda e: -counts[e])  # stable: ties keep shuffled order
    sizes = [0] * k
    assignment = {}
    for exp in order:
        fold = min(range(k), key=sizes.__getitem__)
        assignment[exp] = fold
        sizes[fold] += counts[exp]
    return FoldPlan(k=k, assignment=assignment)


def check_grouping(plan: FoldPlan, samples: list) -> None:
    """Every sample's experiment must be planned; train/test stay disjoint.

    Disjointness is structural once each experiment has exactly one fold,
    so the check verifies coverage and single-fold membership explicitly.
    """
    seen: dict = {}
    for s in samples:
        fold = plan.fold_of(s.experiment_id)
        prev = seen.setdefault(s.experiment_id, fold)
        if prev != fold:
            raise ProtocolViolationError(
                f"experiment {s.experiment_id!r} appears in folds {prev} and {fold}"
            )


# --------------------------------------------------------------------------
# metrics

@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    auc: float
    f1: float
    sensitivity: float
    specificity: float
    tp: int
    tn: int
    fp: int
    fn: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "auc": self.auc,
            "f1": self.f1,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "tp": self.tp,
            "tn": self.tn,
            "fp": self.fp,
            "fn": self.fn,
        }


def _as_positive_flags(values: list, what: str) -> np.ndarray:
    flags = np.empty(len(values), dtype=bool)
    for i, v in enumerate(values):
        if v == LABEL_RELEASE:
            flags[i] = True
        elif v == LABEL_NO_RELEASE:
            flags[i] = False
        else:
            raise InvalidArgumentError(
                f"{what}[{i}] must be {LABEL_RELEASE!r} or {LABEL_NO_RELEASE!r}, got {v!r}"
            )
    return flags


def roc_auc(labels: list, release_scores: list) -> float:
    """Trapezoidal area under the ROC swept over all distinct thresholds."""
    y = _as_positive_flags(labels, "labels")
    s = np.asarray(release_scores, dtype=float)
    if y.size != s.size:
        raise InvalidArgumentError("labels and scores must have equal length")
    npos = int(y.sum())
    nneg = int(y.size - npos)
    if npos == 0 or nneg == 0:
        raise UndefinedMetricError("AUC needs both classes present in the labels")
    tpr = [0.0]
    fpr = [0.0]
    for t in sorted(set(s.tolist()), reverse=True):
        hit = s >= t
        tpr.append(float((hit & y).sum()) / npos)
        fpr.append(float((hit & ~y).sum()) / nneg)
    tpr.append(1.0)
    fpr.append(1.0)
    return float(np.trapezoid(tpr, fpr))


def compute_metrics(labels: list, predictions: list, release_scores: list) -> MetricsReport:
    if not (len(labels) == len(predictions) == len(release_scores)):
        raise InvalidArgumentError("labels, predictions, and scores must have equal length")
    if not labels:
        raise InvalidArgumentError("cannot compute metrics on an empty run")
    y = _as_positive_flags(labels, "labels")
    p = _as_positive_flags(predictions, "predictions")
    if not y.any():
        raise UndefinedMetricError("sensitivity undefined: no release samples in labels")
    if y.all():
        raise UndefinedMetricError("specificity undefined: no no-release samples in labels")
    tp = int((y & p).sum())
    tn = int((~y & ~p).sum())
    fp = int((~y & p).sum())
    fn = int((y & ~p).sum())
    sensitivity = tp / (tp + fn)
    specificity = tn / (tn + fp)
    accuracy = (tp + tn) / len(labels)
    if tp + fp == 0:
        f1 = 0.0  # no positive predictions: precision vacuous, report 0
    else:
        precision = tp / (tp + fp)
        f1 = 0.0 if precision + sensitivity == 0 else (
            2.0 * precision * sensitivity / (precision + sensitivity)
        )
    return MetricsReport(
        accuracy=accuracy,
        auc=roc_auc(labels, release_scores),
        f1=f1,
        sensitivity=sensitivity,
        specificity=specificity,
        tp=tp, tn=tn, fp=fp, fn=fn,
    )


# --------------------------------------------------------------------------
# cross-validated ensemble evaluation

@dataclass(frozen=True)
class CrossValReport:
    pooled: MetricsReport
    per_fold: dict          # fold index -> MetricsReport
    per_member: dict        # "method:background" -> MetricsReport
    predictions: list       # [FusedPrediction] sorted by recording


def _recording_truth(records: list) -> dict:
    """recording_id -> (experiment_id, label); backgrounds must agree."""
    truth: dict = {}
    for r in records:
        rec = recording_id(r.sample_id, r.background)
        entry = (r.experiment_id, r.label)
        prev = truth.setdefault(rec, entry)
        if prev != entry:
            raise DataIntegrityError(
                f"recording {rec!r} has conflicting metadata across backgrounds: "
                f"{prev} vs {entry}"
            )
    return truth


def _check_provenance(member_key: tuple, table, truth: dict, plan: FoldPlan) -> None:
    if table.folds is None:
        raise ProtocolViolationError(
            f"member {member_key} score table lacks fold provenance"
        )
    for rec, fold in table.folds.items():
        if rec not in truth:
            raise ProtocolViolationError(
                f"member {member_key} scored unknown recording {rec!r}"
            )
        expected = plan.fold_of(truth[rec][0])
        if fold != expected:
            raise ProtocolViolationError(
                f"member {member_key} scored {rec!r} with a fold-{fold} model, "
                f"but the plan tests it in fold {expected}"
            )


def _metrics_for(preds: list, truth: dict) -> MetricsReport:
    labels = [truth[p.recording][1] for p in preds]
    return compute_metrics(
        labels,
        [p.label for p in preds],
        [p.vector.release for p in preds],
    )


def cross_validated_run(
    config: EnsembleConfig,
    plan: FoldPlan,
    records: list,
    member_tables: dict,
) -> CrossValReport:
    """Fuse fold-provenanced member scores and report pooled/per-fold metrics.

    ``member_tables`` maps member.key -> ScoreTable keyed by recording id
    (patch tables already collapsed). Each table must tag every row with the
    fold whose held-out model produced it.
    """
    truth = _recording_truth(records)
    for m in config.members:
        if m.key not in member_tables:
            raise DataIntegrityError(f"no score table for member {m.key}")
        _check_provenance(m.key, member_tables[m.key], truth, plan)

    member_scores = {key: t.scores for key, t in member_tables.items()}
    preds = run_ensemble(config, member_scores)
    for p in preds:
        if p.recording not in truth:
            raise DataIntegrityError(f"fused recording {p.recording!r} not in the manifest")

    by_fold: dict = {}
    for p in preds:
        fold = plan.fold_of(truth[p.recording][0])
        by_fold.setdefault(fold, []).append(p)
    per_fold = {fold: _metrics_for(group, truth) for fold, group in sorted(by_fold.items())}

    per_member: dict = {}
    for m in config.members:
        table = member_tables[m.key]
        solo = [
            FusedPrediction(rec, vec, vec.label)
            for rec, vec in sorted(table.scores.items())
        ]
        per_member[f"{m.method_id}:{m.background}"] = _metrics_for(solo, truth)

    return CrossValReport(
        pooled=_metrics_for(preds, truth),
        per_fold=per_fold,
        per_member=per_member,
        predictions=preds,
    )
