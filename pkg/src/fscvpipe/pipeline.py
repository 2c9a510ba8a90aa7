"""Batch orchestration: variant derivation, fold scoring, score collection.

A "variant" is one derived dataset: a (background, method) pair under
  <variants>/<background>/<method>/{manifest.csv, images/...}
Methods: orig, zone-common, zone-concat, patch-200, patch-290, and
<alg>-{fg,fgroi,roi} for the five saliency algorithms. Patch variants store
one manual (training) patch per sample plus the sliding-window (testing)
patches; their manifests carry extra mode/offset columns.

Derivation is cached: every output is keyed by a digest of its input image
bytes, method, and parameters, recorded in .cache.json per variant, so
re-runs only touch work whose inputs changed.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import (
    SampleRecord,
    load_dataset_geometry,
    load_manifest,
    resolve_image_path,
)
from .errors import DataIntegrityError, InvalidArgumentError
from .evaluation import FoldPlan
from .fusion import (
    BACKGROUNDS,
    CNN_METHODS,
    GLOBAL_METHODS,
    PATCH_METHODS,
    SALIENCY_ALGS,
    ScoreTable,
    collapse_patch_scores,
    detector_to_scores,
    read_scores_csv,
    recording_id,
)
from .imaging.raster import ImageMatrix
from .regions import ZoneGeometry, auto_patches, manual_patch, pad_to_square, zone_common, zone_concat
from .saliency import SaliencyParams, cosaliency, saliency_triplet
from .scoring import FoldScorer, detect_release_boxes, image_features

ALL_METHODS = CNN_METHODS  # the 20 derivable per-background variants


def log(msg: str) -> None:
    print(msg, file=sys.stderr)


# --------------------------------------------------------------------------
# digest cache

class _Cache:
    def __init__(self, variant_dir: Path):
        self._path = variant_dir / ".cache.json"
        try:
            self._entries = json.loads(self._path.read_text(encoding="utf-8"))
        except (OSError, ValueError):
            self._entries = {}
        self._dirty = False

    def fresh(self, rel_name: str, digest: str, variant_dir: Path) -> bool:
        return self._entries.get(rel_name) == digest and (variant_dir / rel_name).is_file()

    def record(self, rel_name: str, digest: str) -> None:
        if self._entries.get(rel_name) != digest:
            self._entries[rel_name] = digest
            self._dirty = True

    def save(self) -> None:
        if self._dirty:
            self._path.write_text(
                json.dumps(self._entries, indent=0, sort_keys=True), encoding="utf-8"
            )


def _digest(*parts: bytes | str) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(p.encode() if isinstance(p, str) else p)
        h.update(b"\x00")
    return h.hexdigest()


# --------------------------------------------------------------------------
# derivation

@dataclass(frozen=True)
class DeriveResult:
    variants: int
    written: int
    skipped: int
    substitutions: list  # log lines for empty-ROI fallbacks


def _scaled_window(geom: ZoneGeometry) -> tuple[int, int]:
    return geom.window, geom.stride


def _write_variant_manifest(
    variant_dir: Path, rows: list, extra_cols: tuple = ()
) -> None:
    from .dataset import MANIFEST_COLUMNS

    with (variant_dir / "manifest.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(MANIFEST_COLUMNS) + list(extra_cols))
        for row in rows:
            w.writerow(row)


def _manifest_row(rec: SampleRecord, sample_id: str, rel_path: str, keep_peaks: bool,
                  extra: tuple = ()) -> list:
    peak = rec.peak if (keep_peaks and rec.peak) else ("", "")
    interval = rec.interval if (keep_peaks and rec.interval) else ("", "")
    return [
        sample_id, rec.experiment_id, rec.background, rec.label, rel_path,
        peak[0], peak[1], interval[0], interval[1], *extra,
    ]


def _derive_global(method: str, rec: SampleRecord, img: ImageMatrix,
                   geom: ZoneGeometry) -> ImageMatrix:
    if method == "orig":
        return img
    if method == "zone-common":
        return zone_common(img, geom)
    if method == "zone-concat":
        return zone_concat(img, geom)
    raise InvalidArgumentError(f"unknown global method {method!r}")


def _derive_patches(method: str, rec: SampleRecord, img: ImageMatrix,
                    geom: ZoneGeometry) -> list:
    """[(suffix, patch image, mode, offset)] for one sample."""
    window, stride = _scaled_window(geom)
    if method == "patch-200":
        zone = zone_common(img, geom)
        size = geom.common_height
    else:
        zone = zone_concat(img, geom)
        size = geom.concat_height
    peak_x = rec.peak[0] if rec.peak else zone.width // 2
    out = [("m", manual_patch(zone, min(peak_x, zone.width - 1), size), "manual", peak_x)]
    for patch, off in auto_patches(zone, window, stride).patches:
        out.append((f"p{off}", pad_to_square(patch, size), "automatic", off))
    return out


def _saliency_outputs(trip, sample_id: str) -> tuple[list, list]:
    """([(variant, image)], [substitution log lines])"""
    subs = []
    fg = trip.foreground
    fgroi = trip.fg_roi
    roi = trip.roi
    if fgroi is None:
        fgroi = fg
        subs.append(f"{sample_id}: {trip.method} fg-roi empty, substituted foreground")
    if roi is None:
        roi = fg
        subs.append(f"{sample_id}: {trip.method} roi empty, substituted foreground")
    return [("fg", fg), ("fgroi", fgroi), ("roi", roi)], subs


def _derive_saliency_group(args) -> list:
    """Worker task: one (alg, image group) unit. Returns log/result tuples."""
    alg, entries, out_root, params = args
    results = []
    if alg == "cosal":
        imgs = [ImageMatrix.open(path) for _, path, _ in entries]
        maps = cosaliency(imgs, params)
    else:
        imgs = maps = None
    for i, (sid, path, digests) in enumerate(entries):
        img = imgs[i] if imgs is not None else ImageMatrix.open(path)
        sal = maps[i] if maps is not None else None
        trip = saliency_triplet(img, alg, params, saliency=sal)
        outputs, subs = _saliency_outputs(trip, sid)
        for variant, image in outputs:
            rel = f"images/{sid}.png"
            image.save(Path(out_root) / f"{alg}-{variant}" / rel)
        results.append((sid, digests, subs))
    return results


def derive_variants(
    manifest_path: str | Path,
    out_dir: str | Path,
    methods: list | None = None,
    backgrounds: list | None = None,
    params: SaliencyParams | None = None,
    geometry: ZoneGeometry | None = None,
    workers: int = 1,
) -> DeriveResult:
    manifest_path = Path(manifest_path)
    out = Path(out_dir)
    methods = list(methods) if methods else list(ALL_METHODS)
    unknown = set(methods) - set(ALL_METHODS)
    if unknown:
        raise InvalidArgumentError(f"unknown methods: {sorted(unknown)}")
    params = params or SaliencyParams()
    geometry = geometry or load_dataset_geometry(manifest_path)
    records = load_manifest(manifest_path)
    wanted_bgs = list(backgrounds) if backgrounds else list(BACKGROUNDS)
    by_bg: dict = {bg: [] for bg in wanted_bgs}
    for r in records:
        if r.background in by_bg:
            by_bg[r.background].append(r)

    written = skipped = variants = 0
    substitutions: list = []
    param_tag = repr(dataclasses.asdict(params)) + repr(geometry)

    for bg, bg_records in by_bg.items():
        bg_records = sorted(bg_records, key=lambda r: r.sample_id)
        src_bytes = {
            r.sample_id: resolve_image_path(manifest_path, r).read_bytes()
            for r in bg_records
        }

        # global + patch methods: cheap, always sequential
        for method in methods:
            if method not in GLOBAL_METHODS + PATCH_METHODS:
                continue
            variants += 1
            vdir = out / bg / method
            (vdir / "images").mkdir(parents=True, exist_ok=True)
            cache = _Cache(vdir)
            rows = []
            for r in bg_records:
                if method in GLOBAL_METHODS:
                    rel = f"images/{r.sample_id}.png"
                    dig = _digest(src_bytes[r.sample_id], method, param_tag)
                    rows.append(_manifest_row(r, r.sample_id, rel, keep_peaks=(method == "orig")))
                    if cache.fresh(rel, dig, vdir):
                        skipped += 1
                        continue
                    img = ImageMatrix.open(resolve_image_path(manifest_path, r))
                    _derive_global(method, r, img, geometry).save(vdir / rel)
                    cache.record(rel, dig)
                    written += 1
                else:
                    img = ImageMatrix.open(resolve_image_path(manifest_path, r))
                    for suffix, patch, mode, off in _derive_patches(method, r, img, geometry):
                        sid = f"{r.sample_id}.{suffix}"
                        rel = f"images/{sid}.png"
                        dig = _digest(src_bytes[r.sample_id], method, suffix, param_tag)
                        rows.append(_manifest_row(r, sid, rel, keep_peaks=False,
                                                  extra=(mode, off)))
                        if cache.fresh(rel, dig, vdir):
                            skipped += 1
                            continue
                        patch.save(vdir / rel)
                        cache.record(rel, dig)
                        written += 1
            extra = ("mode", "offset") if method in PATCH_METHODS else ()
            _write_variant_manifest(vdir, rows, extra)
            cache.save()

        # saliency methods: one triplet computation covers fg/fgroi/roi
        for alg in SALIENCY_ALGS:
            if not any(m.startswith(alg + "-") for m in methods):
                continue
            caches = {}
            for variant in ("fg", "fgroi", "roi"):
                variants += 1
                vdir = out / bg / f"{alg}-{variant}"
                (vdir / "images").mkdir(parents=True, exist_ok=True)
                caches[variant] = _Cache(vdir)
                rows = [
                    _manifest_row(r, r.sample_id, f"images/{r.sample_id}.png", keep_peaks=False)
                    for r in bg_records
                ]
                _write_variant_manifest(vdir, rows)

            if alg == "cosal":
                groups: dict = {}
                for r in bg_records:
                    groups.setdefault(r.experiment_id, []).append(r)
                units = [grp for _, grp in sorted(groups.items())]
                group_tag = {
                    id(grp): _digest(*(src_bytes[r.sample_id] for r in grp))
                    for grp in units
                }
            else:
                units = [[r] for r in bg_records]
                group_tag = {id(u): "" for u in units}

            tasks = []
            for unit in units:
                entries = []
                for r in unit:
                    dig = _digest(src_bytes[r.sample_id], alg, param_tag, group_tag[id(unit)])
                    rel = f"images/{r.sample_id}.png"
                    if all(
                        caches[v].fresh(rel, dig, out / bg / f"{alg}-{v}")
                        for v in ("fg", "fgroi", "roi")
                    ):
                        skipped += 3
                        continue
                    entries.append((r.sample_id, str(resolve_image_path(manifest_path, r)), dig))
                if entries:
                    tasks.append((alg, entries, str(out / bg), params))

            for result in _run_tasks(_derive_saliency_group, tasks, workers):
                for sid, dig, subs in result:
                    substitutions.extend(subs)
                    rel = f"images/{sid}.png"
                    for v in ("fg", "fgroi", "roi"):
                        caches[v].record(rel, dig)
                    written += 3
            for c in caches.values():
                c.save()

    substitutions.sort()
    return DeriveResult(variants, written, skipped, substitutions)


def _run_tasks(fn, tasks: list, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        for t in tasks:
            yield fn(t)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(fn, tasks)


# --------------------------------------------------------------------------
# fold scoring

def _variant_manifest_rows(variant_dir: Path) -> list:
    """(sample_id, experiment_id, label, image path, mode) per row."""
    rows = []
    path = variant_dir / "manifest.csv"
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append((
                row["sample_id"],
                row["experiment_id"],
                row["label"],
                variant_dir / row["image_path"],
                row.get("mode", ""),
            ))
    return rows


def score_variant(
    variant_dir: str | Path,
    method: str,
    plan: FoldPlan,
    ridge: float = 1.0,
) -> ScoreTable:
    """Cross-validated ridge scores for one derived variant.

    Global/saliency variants: every sample is scored by the model that holds
    out its fold. Patch variants: models train on manual patches and score
    the sliding-window patches of held-out samples.
    """
    rows = _variant_manifest_rows(Path(variant_dir))
    if not rows:
        raise DataIntegrityError(f"variant {variant_dir} has an empty manifest")
    feats = np.array([image_features(ImageMatrix.open(p)) for _, _, _, p, _ in rows])
    labels = [lab for _, _, lab, _, _ in rows]
    folds = np.array([plan.fold_of(exp) for _, exp, _, _, _ in rows])
    modes = [m for *_, m in rows]
    is_patch = method in PATCH_METHODS

    scorer = FoldScorer(feats, labels, ridge=ridge)
    table = ScoreTable(folds={})
    for fold in range(plan.k):
        test_mask = folds == fold
        if is_patch:
            train_idx = np.flatnonzero(~test_mask & (np.array(modes) == "manual"))
            test_idx = np.flatnonzero(test_mask & (np.array(modes) == "automatic"))
        else:
            train_idx = np.flatnonzero(~test_mask)
            test_idx = np.flatnonzero(test_mask)
        if test_idx.size == 0:
            continue
        for i, vec in zip(test_idx, scorer.score_fold(train_idx, test_idx)):
            sid = rows[i][0]
            table.scores[sid] = vec
            table.folds[sid] = fold
    return table


def score_detector(
    manifest_path: str | Path,
    background: str,
    plan: FoldPlan,
) -> tuple[ScoreTable, dict]:
    """Training-free detector pass over one background's original images.

    Returns the score table (fold column from the plan, for protocol
    uniformity) and the raw per-sample boxes.
    """
    records = [
        r for r in load_manifest(manifest_path) if r.background == background
    ]
    table = ScoreTable(folds={})
    detections: dict = {}
    for r in sorted(records, key=lambda r: r.sample_id):
        boxes = detect_release_boxes(ImageMatrix.open(resolve_image_path(manifest_path, r)))
        if boxes:
            detections[r.sample_id] = boxes
        table.scores[r.sample_id] = detector_to_scores(boxes)
        table.folds[r.sample_id] = plan.fold_of(r.experiment_id)
    return table, detections


# --------------------------------------------------------------------------
# score collection for fusion/eval

def member_scores_path(scores_dir: str | Path, method: str, background: str) -> Path:
    return Path(scores_dir) / f"{method}_{background}.csv"


def collect_member_scores(scores_dir: str | Path, members: list) -> dict:
    """member.key -> ScoreTable keyed by recording id (patches collapsed)."""
    out: dict = {}
    for m in members:
        path = member_scores_path(scores_dir, m.method_id, m.background)
        if not path.is_file():
            raise DataIntegrityError(
                f"member {m.key} has no score file at {path}"
            )
        table = read_scores_csv(path)
        if m.method_id in PATCH_METHODS:
            table = collapse_patch_scores(table)
        rekeyed = ScoreTable(folds=None if table.folds is None else {})
        for sid, vec in table.scores.items():
            rec = recording_id(sid, m.background)
            if rec in rekeyed.scores:
                raise DataIntegrityError(
                    f"{path.name}: recordings collide after background strip: {rec!r}"
                )
            rekeyed.scores[rec] = vec
            if table.folds is not None:
                rekeyed.folds[rec] = table.folds[sid]
        out[m.key] = rekeyed
    return out
