"""Command-line pipeline front end.

Every command is deterministic given its inputs and seed. Data goes to
files; diagnostics go to stderr; exit code 0 means no errors. Options may
come from a YAML config file (--config); explicit flags win over the file,
the file wins over defaults.
"""
from __future__ import annotations

import dataclasses
import json
import os
import sys
from pathlib import Path

import click
import yaml

from .dataset import (
    load_dataset_geometry,
    load_manifest,
    resolve_image_path,
    synthesize_dataset,
)
from .errors import PipelineError
from .evaluation import FoldPlan, check_grouping, compute_metrics, cross_validated_run, grouped_kfold
from .fusion import (
    BACKGROUNDS,
    PATCH_METHODS,
    ScoreTable,
    run_ensemble,
    standard_ensembles,
    write_detections_csv,
    write_scores_csv,
)
from .imaging.raster import ImageMatrix
from .pipeline import (
    ALL_METHODS,
    collect_member_scores,
    derive_variants,
    member_scores_path,
    score_detector,
    score_variant,
)
from .regions import zone_common, zone_concat
from .saliency import METHODS as SALIENCY_METHOD_NAMES, SaliencyParams, saliency_triplet

METHOD_GROUPS = {
    "all": list(ALL_METHODS),
    "globals": ["orig", "zone-common", "zone-concat"],
    "patches": list(PATCH_METHODS),
    "saliency": [m for m in ALL_METHODS if m.split("-")[0] in SALIENCY_METHOD_NAMES],
}


def _fail(exc: Exception) -> "click.ClickException":
    e = click.ClickException(str(exc))
    e.exit_code = 1
    return e


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise click.ClickException(f"config {path} must be a mapping")
    return data


def _pick(flag, cfg: dict, key: str, default):
    """Precedence: explicit flag > config file > default."""
    if flag is not None:
        return flag
    return cfg.get(key, default)


def _saliency_params(cfg: dict) -> SaliencyParams:
    section = cfg.get("saliency", {}) or {}
    params = SaliencyParams()
    nested = {}
    for name in ("gbvs", "cosal", "spectral", "wavelet"):
        block = section.get(name)
        if block:
            nested[name] = dataclasses.replace(getattr(params, name), **block)
    top = {k: v for k, v in section.items()
           if k in ("mask_threshold", "roi_line_frac")}
    return dataclasses.replace(params, **top, **nested)


def _default_workers(flag, cfg: dict) -> int:
    if flag is not None:
        return flag
    if "workers" in cfg:
        return int(cfg["workers"])
    return int(os.environ.get("FSCVPIPE_WORKERS", "1"))


def _parse_methods(spec: str | None, cfg: dict) -> list:
    raw = _pick(spec, cfg, "methods", "all")
    if isinstance(raw, str):
        raw = [s.strip() for s in raw.split(",") if s.strip()]
    out: list = []
    for item in raw:
        expanded = METHOD_GROUPS.get(item, [item])
        out.extend(m for m in expanded if m not in out)
    return out


def _parse_backgrounds(spec: str | None, cfg: dict) -> list:
    raw = _pick(spec, cfg, "backgrounds", "".join(BACKGROUNDS))
    if isinstance(raw, str):
        raw = [c for c in raw.replace(",", "") if not c.isspace()]
    return list(raw)


@click.group()
def main() -> None:
    """Release-identification pipeline: synthesis, derivation, scoring, fusion."""


# --------------------------------------------------------------------------

@main.command()
@click.option("--out", required=True, type=click.Path())
@click.option("--experiments", default=None, type=int)
@click.option("--per-exp", default=None, type=int, help="release (and no-release) recordings per experiment")
@click.option("--seed", default=None, type=int)
@click.option("--scale", default=None, type=float, help="shrink all pixel geometry by this factor")
@click.option("--backgrounds", default=None)
@click.option("--force", is_flag=True, help="write into a non-empty directory")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def synth(out, experiments, per_exp, seed, scale, backgrounds, force, config_path) -> None:
    """Generate a synthetic dataset tree (images, manifest, geometry)."""
    cfg = _load_config(config_path)
    out_dir = Path(out)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise click.ClickException(f"{out_dir} is not empty; pass --force to write anyway")
    try:
        summary = synthesize_dataset(
            out_dir,
            experiments=_pick(experiments, cfg, "experiments", 30),
            per_exp=_pick(per_exp, cfg, "per_exp", 10),
            seed=_pick(seed, cfg, "seed", 0),
            scale=_pick(scale, cfg, "scale", 1.0),
            backgrounds=tuple(_parse_backgrounds(backgrounds, cfg)),
        )
    except PipelineError as exc:
        raise _fail(exc)
    click.echo(
        f"synth: {summary['recordings']} recordings, {summary['images']} images "
        f"({summary['experiments']} experiments x {2 * summary['per_exp']} recordings "
        f"x {len(summary['backgrounds'])} backgrounds)",
        err=True,
    )


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--methods", default=None, help="comma list of method ids or groups (all/globals/patches/saliency)")
@click.option("--backgrounds", default=None)
@click.option("--workers", default=None, type=int)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def derive(manifest_path, out, methods, backgrounds, workers, config_path) -> None:
    """Produce the derived dataset variants (zones, patches, saliency crops)."""
    cfg = _load_config(config_path)
    try:
        result = derive_variants(
            manifest_path,
            out,
            methods=_parse_methods(methods, cfg),
            backgrounds=_parse_backgrounds(backgrounds, cfg),
            params=_saliency_params(cfg),
            workers=_default_workers(workers, cfg),
        )
    except PipelineError as exc:
        raise _fail(exc)
    for line in result.substitutions:
        click.echo(f"derive: {line}", err=True)
    click.echo(
        f"derive: {result.variants} variants, {result.written} images written, "
        f"{result.skipped} cached",
        err=True,
    )


@main.command()
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--method", "method", default="all")
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def saliency(image_path, method, out, config_path) -> None:
    """Saliency map, mask, and masked crops for a single image."""
    cfg = _load_config(config_path)
    params = _saliency_params(cfg)
    methods = list(SALIENCY_METHOD_NAMES) if method == "all" else [method]
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(image_path).stem
    try:
        img = ImageMatrix.open(image_path)
        for m in methods:
            trip = saliency_triplet(img, m, params)
            trip.saliency.save(out_dir / f"{stem}.{m}.map.png")
            trip.mask.save(out_dir / f"{stem}.{m}.mask.png")
            trip.foreground.save(out_dir / f"{stem}.{m}.fg.png")
            for name, image in (("fgroi", trip.fg_roi), ("roi", trip.roi)):
                if image is None:
                    click.echo(f"saliency: {stem}.{m}.{name} is empty, skipped", err=True)
                else:
                    image.save(out_dir / f"{stem}.{m}.{name}.png")
            if trip.saliency.degenerate:
                click.echo(f"saliency: {stem}.{m} map is degenerate (no contrast)", err=True)
    except PipelineError as exc:
        raise _fail(exc)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--kind", type=click.Choice(["common", "concat", "both"]), default="both")
def zones(manifest_path, out, kind) -> None:
    """Cut the release-band and concatenated zones for every image."""
    geom = load_dataset_geometry(manifest_path)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        for rec in load_manifest(manifest_path):
            img = ImageMatrix.open(resolve_image_path(manifest_path, rec))
            if kind in ("common", "both"):
                zone_common(img, geom).save(out_dir / f"{rec.sample_id}.common.png")
            if kind in ("concat", "both"):
                zone_concat(img, geom).save(out_dir / f"{rec.sample_id}.concat.png")
    except PipelineError as exc:
        raise _fail(exc)
    click.echo(f"zones: wrote {kind} crops to {out_dir}", err=True)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--method", type=click.Choice(list(PATCH_METHODS)), default="patch-200")
def patches(manifest_path, out, method) -> None:
    """Manual and sliding-window patches for every image of one method."""
    try:
        result = derive_variants(manifest_path, out, methods=[method])
    except PipelineError as exc:
        raise _fail(exc)
    click.echo(f"patches: {result.written} written, {result.skipped} cached", err=True)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--k", default=None, type=int)
@click.option("--seed", default=None, type=int)
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def foldplan(manifest_path, k, seed, out, config_path) -> None:
    """Assign experiments to cross-validation folds (grouped, size-balanced)."""
    cfg = _load_config(config_path)
    try:
        records = load_manifest(manifest_path, check_images=False)
        plan = grouped_kfold(
            records,
            k=_pick(k, cfg, "k", 10),
            seed=_pick(seed, cfg, "seed", 0),
        )
        check_grouping(plan, records)
        plan.save(out)
    except PipelineError as exc:
        raise _fail(exc)
    sizes: dict = {}
    for exp, fold in plan.assignment.items():
        sizes[fold] = sizes.get(fold, 0) + 1
    click.echo(
        f"foldplan: {len(plan.assignment)} experiments over {plan.k} folds "
        f"(experiments per fold: {[sizes.get(f, 0) for f in range(plan.k)]})",
        err=True,
    )


@main.command("score-baseline")
@click.option("--variants", "variants_dir", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--ridge", default=None, type=float)
@click.option("--detector/--no-detector", "with_detector", default=True)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def score_baseline(variants_dir, manifest_path, plan_path, out, ridge,
                   with_detector, config_path) -> None:
    """Cross-validated ridge scores for every derived variant, plus detections."""
    cfg = _load_config(config_path)
    ridge = _pick(ridge, cfg, "ridge", 1.0)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        plan = FoldPlan.load(plan_path)
        variants_root = Path(variants_dir)
        scored = 0
        seen_bgs = []
        for bg_dir in sorted(p for p in variants_root.iterdir() if p.is_dir()):
            seen_bgs.append(bg_dir.name)
            for vdir in sorted(p for p in bg_dir.iterdir() if p.is_dir()):
                if not (vdir / "manifest.csv").is_file():
                    continue
                table = score_variant(vdir, vdir.name, plan, ridge=ridge)
                write_scores_csv(member_scores_path(out_dir, vdir.name, bg_dir.name), table)
                scored += 1
        if with_detector:
            for bg in seen_bgs:
                table, boxes = score_detector(manifest_path, bg, plan)
                write_scores_csv(member_scores_path(out_dir, "detector", bg), table)
                write_detections_csv(out_dir / f"detector_{bg}.boxes.csv", boxes)
                scored += 1
    except PipelineError as exc:
        raise _fail(exc)
    click.echo(f"score-baseline: {scored} score files in {out_dir}", err=True)


def _resolve_ensemble(name: str):
    table = standard_ensembles()
    if name not in table:
        raise click.ClickException(
            f"unknown ensemble {name!r}; choose from {', '.join(sorted(table))}"
        )
    return table[name]


def _write_fused_csv(path: Path, predictions: list) -> None:
    table = ScoreTable(
        scores={p.recording: p.vector for p in predictions}
    )
    write_scores_csv(path, table)


def _truth_labels(manifest_path: str) -> dict:
    from .evaluation import _recording_truth

    return _recording_truth(load_manifest(manifest_path, check_images=False))


@main.command()
@click.option("--scores", "scores_dir", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--ensemble", "ensemble_name", default="all-methods")
@click.option("--out", required=True, type=click.Path())
def fuse(scores_dir, manifest_path, ensemble_name, out) -> None:
    """Sum-rule fusion of member scores; emits fused vectors and metrics."""
    config = _resolve_ensemble(ensemble_name)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        member_scores = {
            key: t.scores
            for key, t in collect_member_scores(scores_dir, list(config.members)).items()
        }
        preds = run_ensemble(config, member_scores)
        truth = _truth_labels(manifest_path)
        missing = [p.recording for p in preds if p.recording not in truth]
        if missing:
            raise click.ClickException(
                f"scored recordings absent from the manifest: {missing[:5]}"
            )
        metrics = compute_metrics(
            [truth[p.recording][1] for p in preds],
            [p.label for p in preds],
            [p.vector.release for p in preds],
        )
    except PipelineError as exc:
        raise _fail(exc)
    _write_fused_csv(out_dir / "fused.csv", preds)
    payload = {
        "ensemble": config.name,
        "scores_fused": len(config.members),
        "metrics": metrics.to_dict(),
    }
    with (out_dir / "metrics.json").open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    click.echo(
        f"fuse: {config.name} | Scores Fused: {len(config.members)} | "
        f"accuracy {metrics.accuracy:.4f}",
        err=True,
    )


@main.command("eval")
@click.option("--scores", "scores_dir", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
@click.option("--ensemble", "ensemble_name", default="all-methods")
@click.option("--out", required=True, type=click.Path())
def eval_cmd(scores_dir, manifest_path, plan_path, ensemble_name, out) -> None:
    """Cross-validated fusion with fold-provenance checks."""
    config = _resolve_ensemble(ensemble_name)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        plan = FoldPlan.load(plan_path)
        records = load_manifest(manifest_path, check_images=False)
        check_grouping(plan, records)
        tables = collect_member_scores(scores_dir, list(config.members))
        report = cross_validated_run(config, plan, records, tables)
    except PipelineError as exc:
        raise _fail(exc)
    _write_fused_csv(out_dir / "fused.csv", report.predictions)
    payload = {
        "ensemble": config.name,
        "scores_fused": len(config.members),
        "k": plan.k,
        "pooled": report.pooled.to_dict(),
        "per_fold": {str(f): m.to_dict() for f, m in report.per_fold.items()},
        "per_member": {name: m.to_dict() for name, m in sorted(report.per_member.items())},
    }
    with (out_dir / "metrics.json").open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    click.echo(
        f"eval: {config.name} | Scores Fused: {len(config.members)} | "
        f"pooled accuracy {report.pooled.accuracy:.4f}, AUC {report.pooled.auc:.4f}",
        err=True,
    )


_TABLE_COLS = ("Accuracy", "AUC", "F1", "Sensitivity", "Specificity")


@main.command()
@click.option("--eval", "eval_paths", multiple=True, required=True,
              type=click.Path(exists=True), help="metrics.json files or eval output dirs")
@click.option("--out", required=True, type=click.Path())
def report(eval_paths, out) -> None:
    """Combine eval outputs into one ranked results table."""
    rows = []
    try:
        for p in eval_paths:
            path = Path(p)
            if path.is_dir():
                path = path / "metrics.json"
            with path.open(encoding="utf-8") as fh:
                data = json.load(fh)
            pooled = data.get("pooled") or data.get("metrics")
            if pooled is None:
                raise click.ClickException(f"{path} carries no metrics")
            cells = [f"{100.0 * float(pooled[c.lower()]):.2f}" for c in _TABLE_COLS]
            rows.append((data.get("ensemble", path.stem), data.get("scores_fused", ""), pooled, cells))
    except (OSError, ValueError, KeyError) as exc:
        raise click.ClickException(f"could not read eval output: {exc}")

    header = ["Method", "Scores Fused", *_TABLE_COLS]
    body = [[name, str(fused), *cells] for name, fused, _, cells in rows]
    widths = [max(len(h), *(len(r[i]) for r in body)) for i, h in enumerate(header)]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)) for r in body]
    out_path = Path(out)
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    json_path = out_path.with_suffix(".json")
    with json_path.open("w", encoding="utf-8") as fh:
        json.dump(
            [{"ensemble": n, "scores_fused": f, "metrics": m} for n, f, m, _ in rows],
            fh, indent=2,
        )
        fh.write("\n")
    click.echo(f"report: {len(rows)} rows -> {out_path} and {json_path}", err=True)


if __name__ == "__main__":
    main()
