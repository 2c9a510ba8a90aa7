"""Dataset manifests, scan matrices, false-coloring, and the synthetic generator.

A recording is one scan matrix (applied potential x time). Each of the three
anchor columns (0.5 s / 10 s / 19.5 s) subtracted from the matrix gives one
background variant, rendered to a false-color PNG. Sample ids carry the
background as a trailing ``_<bg>`` tag so the variants of one recording can
be joined later.

Manifest CSV columns:
  sample_id,experiment_id,background,label,image_path,peak_x,peak_y,interval_x0,interval_x1
Optional fields stay empty. Image paths are relative to the manifest's
directory unless absolute.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IngestionError, InvalidArgumentError
from .fusion import LABEL_NO_RELEASE, LABEL_RELEASE
from .imaging.raster import ImageMatrix
from .regions import ZoneGeometry

BACKGROUND_ANCHORS = {"A": 0.5, "B": 10.0, "C": 19.5}
TIME_SPAN_S = 20.0

MANIFEST_COLUMNS = (
    "sample_id", "experiment_id", "background", "label", "image_path",
    "peak_x", "peak_y", "interval_x0", "interval_x1",
)


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    experiment_id: str
    background: str
    label: str
    image_path: str
    peak: tuple | None = None       # (x, y) pixels
    interval: tuple | None = None   # (x_start, x_end) pixels

    def __post_init__(self):
        if self.background not in BACKGROUND_ANCHORS:
            raise InvalidArgumentError(
                f"background must be one of {sorted(BACKGROUND_ANCHORS)}, got {self.background!r}"
            )
        if self.label not in (LABEL_RELEASE, LABEL_NO_RELEASE):
            raise InvalidArgumentError(f"label must be release/no-release, got {self.label!r}")
        if self.label == LABEL_NO_RELEASE and (self.peak or self.interval):
            raise InvalidArgumentError(
                f"{self.sample_id}: no-release samples cannot carry peak or interval labels"
            )
        if (self.peak is None) != (self.interval is None):
            raise InvalidArgumentError(
                f"{self.sample_id}: peak and interval labels come as a pair"
            )


def _parse_optional_int(row: dict, col: str, line: int) -> int | None:
    raw = (row.get(col) or "").strip()
    if raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise IngestionError(f"column {col} must be an integer, got {raw!r}", row=line) from None


def load_manifest(
    path: str | Path,
    require_peaks: bool = True,
    check_images: bool = True,
) -> list:
    """Read and validate a manifest CSV.

    ``require_peaks`` enforces that release rows carry peak/interval labels;
    derived-variant manifests (where crops invalidate coordinates) load with
    it off. ``check_images`` verifies the referenced files exist.
    """
    path = Path(path)
    records: list = []
    seen: set = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(MANIFEST_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise IngestionError(f"manifest lacks columns: {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            sid = (row["sample_id"] or "").strip()
            if not sid:
                raise IngestionError("empty sample_id", row=line)
            if sid in seen:
                raise IngestionError(f"duplicate sample_id {sid!r}", row=line)
            seen.add(sid)
            px = _parse_optional_int(row, "peak_x", line)
            py = _parse_optional_int(row, "peak_y", line)
            x0 = _parse_optional_int(row, "interval_x0", line)
            x1 = _parse_optional_int(row, "interval_x1", line)
            if (px is None) != (py is None) or (x0 is None) != (x1 is None):
                raise IngestionError("partial peak/interval coordinates", row=line)
            label = (row["label"] or "").strip()
            if require_peaks and label == LABEL_RELEASE and px is None:
                raise IngestionError(
                    f"release sample {sid!r} lacks its peak label", row=line
                )
            try:
                rec = SampleRecord(
                    sample_id=sid,
                    experiment_id=(row["experiment_id"] or "").strip(),
                    background=(row["background"] or "").strip(),
                    label=label,
                    image_path=(row["image_path"] or "").strip(),
                    peak=None if px is None else (px, py),
                    interval=None if x0 is None else (x0, x1),
                )
            except InvalidArgumentError as exc:
                raise IngestionError(str(exc), row=line) from None
            if not rec.experiment_id:
                raise IngestionError("empty experiment_id", row=line)
            if check_images and not resolve_image_path(path, rec).is_file():
                raise IngestionError(
                    f"image file not found: {rec.image_path}", row=line
                )
            records.append(rec)
    if not records:
        warnings.warn(f"manifest {path} contains no samples", stacklevel=2)
    return records


def resolve_image_path(manifest_path: str | Path, record: SampleRecord) -> Path:
    p = Path(record.image_path)
    return p if p.is_absolute() else Path(manifest_path).parent / p


def write_manifest(path: str | Path, records: list) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(MANIFEST_COLUMNS)
        for r in records:
            peak = r.peak or ("", "")
            interval = r.interval or ("", "")
            w.writerow([
                r.sample_id, r.experiment_id, r.background, r.label, r.image_path,
                peak[0], peak[1], interval[0], interval[1],
            ])


# --------------------------------------------------------------------------
# scan matrices

@dataclass(frozen=True)
class FscvMatrix:
    """Current readings: rows = applied-potential samples, cols = cycles.

    Columns map linearly onto [0, 20] seconds.
    """

    values: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.values, dtype=np.float64)
        if a.ndim != 2 or a.size == 0:
            raise InvalidArgumentError(f"matrix must be non-empty 2-D, got shape {a.shape}")
        if not np.isfinite(a).all():
            raise InvalidArgumentError("matrix contains non-finite values")
        a = np.ascontiguousarray(a)
        a.flags.writeable = False
        object.__setattr__(self, "values", a)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


def anchor_column(n_cols: int, time_s: float) -> int:
    """Nearest cycle index for a timestamp on the [0, 20] s axis."""
    if n_cols < 1:
        raise InvalidArgumentError("matrix needs at least one column")
    if not 0.0 <= time_s <= TIME_SPAN_S:
        raise InvalidArgumentError(f"anchor time {time_s} outside [0, {TIME_SPAN_S}] s")
    return round(time_s / TIME_SPAN_S * (n_cols - 1))


def background_subtract(m: FscvMatrix, anchor: str | float) -> FscvMatrix:
    """Subtract the anchor column from every column.

    ``anchor`` is a background letter (A/B/C) or a time in seconds.
    """
    time_s = BACKGROUND_ANCHORS.get(anchor, anchor) if isinstance(anchor, str) else anchor
    if isinstance(time_s, str):
        raise InvalidArgumentError(
            f"anchor must be one of {sorted(BACKGROUND_ANCHORS)} or a time, got {anchor!r}"
        )
    col = anchor_column(m.n_cols, float(time_s))
    return FscvMatrix(m.values - m.values[:, col:col + 1])


# --------------------------------------------------------------------------
# false-color rendering

# (key, (r, g, b)) stops, piecewise-linear per channel.
DEFAULT_PALETTE = (
    (0.00, (0.00, 0.35, 0.00)),   # deep green
    (0.25, (0.00, 0.00, 0.80)),   # blue
    (0.50, (0.00, 0.00, 0.00)),   # black
    (0.75, (1.00, 1.00, 0.00)),   # yellow
    (1.00, (0.55, 0.00, 0.00)),   # dark red
)


def false_color(m: FscvMatrix, palette=DEFAULT_PALETTE) -> ImageMatrix:
    if len(palette) < 2:
        raise InvalidArgumentError("palette needs at least two stops")
    keys = np.array([k for k, _ in palette], dtype=float)
    if not (np.diff(keys) > 0).all():
        raise InvalidArgumentError("palette keys must strictly ascend")
    stops = np.array([c for _, c in palette], dtype=float)
    lo = float(m.values.min())
    hi = float(m.values.max())
    if hi - lo <= 0.0:
        warnings.warn("constant matrix renders at the palette midpoint", stacklevel=2)
        t = np.full(m.values.shape, 0.5 * (keys[0] + keys[-1]))
    else:
        t = (m.values - lo) / (hi - lo) * (keys[-1] - keys[0]) + keys[0]
    rgb = np.stack([np.interp(t, keys, stops[:, ch]) for ch in range(3)], axis=-1)
    return ImageMatrix.from_array(rgb, clip=True)


# --------------------------------------------------------------------------
# synthetic recordings

@dataclass(frozen=True)
class SynthParams:
    """Geometry and texture of synthetic recordings.

    ``scaled`` shrinks all pixel quantities consistently so a low-resolution
    run exercises identical machinery.
    """

    height: int = 600
    width: int = 875
    release_rows: tuple = (320, 520)
    noise: float = 0.02
    blob_amp: float = 1.0
    blob_sigma_rows: float = 28.0
    blob_sigma_cols: float = 18.0
    blob_center: tuple | None = None   # (row, col); None = sampled per recording
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.release_rows
        if not 0 <= lo < hi <= self.height:
            raise InvalidArgumentError(
                f"release rows {self.release_rows} must fit inside height {self.height}"
            )
        if self.width < 8 or self.height < 8:
            raise InvalidArgumentError("matrix dims must be at least 8x8")
        if self.noise < 0 or self.blob_amp <= 0:
            raise InvalidArgumentError("noise must be >= 0 and blob_amp > 0")
        if min(self.blob_sigma_rows, self.blob_sigma_cols) <= 0:
            raise InvalidArgumentError("blob sigmas must be positive")
        if self.blob_center is not None:
            r0, c0 = self.blob_center
            if not lo <= r0 < hi:
                raise InvalidArgumentError(
                    f"blob center row {r0} outside release rows [{lo}, {hi})"
                )
            if not 0 <= c0 < self.width:
                raise InvalidArgumentError(f"blob center col {c0} outside width {self.width}")

    def scaled(self, scale: float) -> "SynthParams":
        if scale <= 0:
            raise InvalidArgumentError("scale must be positive")
        lo, hi = self.release_rows
        return dataclasses.replace(
            self,
            height=max(8, round(self.height * scale)),
            width=max(8, round(self.width * scale)),
            release_rows=(round(lo * scale), max(round(lo * scale) + 1, round(hi * scale))),
            blob_sigma_rows=max(1.0, self.blob_sigma_rows * scale),
            blob_sigma_cols=max(1.0, self.blob_sigma_cols * scale),
            blob_center=None if self.blob_center is None else (
                round(self.blob_center[0] * scale), round(self.blob_center[1] * scale)
            ),
        )

    def zone_geometry(self) -> ZoneGeometry:
        scale = self.width / 875.0
        return ZoneGeometry().scaled(scale) if self.width != 875 else ZoneGeometry()


def _background_field(p: SynthParams, rng: np.random.Generator) -> np.ndarray:
    rows = np.arange(p.height) / max(1, p.height - 1)
    cols = np.arange(p.width) / max(1, p.width - 1)
    phase = rng.uniform(0.0, 2 * np.pi)
    profile = 0.25 * (1.0 + np.sin(2 * np.pi * rows * 1.5 + phase))
    drift = 0.2 * cols + 0.05 * np.sin(2 * np.pi * cols * 2.0 + phase * 0.5)
    field = profile[:, None] + drift[None, :]
    if p.noise > 0:
        field = field + rng.uniform(-p.noise, p.noise, size=field.shape)
    return field


def _sample_blob_center(p: SynthParams, rng: np.random.Generator) -> tuple:
    lo, hi = p.release_rows
    row_margin = min(2.0 * p.blob_sigma_rows, (hi - lo - 1) / 2.0)
    r0 = rng.uniform(lo + row_margin, hi - 1 - row_margin)
    # keep the blob clear of every anchor column so no subtraction erases it
    guard = 4.0 * p.blob_sigma_cols
    mid = (p.width - 1) / 2.0
    left = (0.12 * p.width, mid - guard)
    right = (mid + guard, 0.88 * p.width)
    band = left if rng.random() < 0.5 else right
    if band[0] >= band[1]:  # narrow matrices: fall back to the wider side
        band = max((left, right), key=lambda b: b[1] - b[0])
    c0 = rng.uniform(*band)
    return r0, c0


def synthesize_sample(
    p: SynthParams,
    with_release: bool,
    sample_id: str = "synthetic_0000_A",
    experiment_id: str = "exp00",
) -> tuple:
    """One deterministic recording: (FscvMatrix, SampleRecord template).

    The record's background is A and its image path is empty; dataset
    assembly rewrites both per rendered variant.
    """
    rng = np.random.default_rng(p.seed)
    field = _background_field(p, rng)
    peak = interval = None
    if with_release:
        if p.blob_center is not None:
            r0, c0 = float(p.blob_center[0]), float(p.blob_center[1])
        else:
            r0, c0 = _sample_blob_center(p, rng)
        amp = p.blob_amp * rng.uniform(1.0, 1.2)
        sr = p.blob_sigma_rows * rng.uniform(0.8, 1.2)
        sc = p.blob_sigma_cols * rng.uniform(0.8, 1.2)
        rr = np.arange(p.height, dtype=float)[:, None]
        cc = np.arange(p.width, dtype=float)[None, :]
        field = field + amp * np.exp(
            -((rr - r0) ** 2 / (2 * sr * sr) + (cc - c0) ** 2 / (2 * sc * sc))
        )
        x = int(round(c0))
        y = int(round(r0))
        x0 = max(0, int(round(c0 - 2 * sc)))
        x1 = min(p.width - 1, int(round(c0 + 2 * sc)))
        peak = (x, y)
        interval = (x0, x1)
    record = SampleRecord(
        sample_id=sample_id,
        experiment_id=experiment_id,
        background="A",
        label=LABEL_RELEASE if with_release else LABEL_NO_RELEASE,
        image_path="",
        peak=peak,
        interval=interval,
    )
    return FscvMatrix(field), record


def synthesize_dataset(
    out_dir: str | Path,
    experiments: int = 30,
    per_exp: int = 10,
    seed: int = 0,
    scale: float = 1.0,
    backgrounds: tuple = ("A", "B", "C"),
    params: SynthParams | None = None,
) -> dict:
    """Write a complete synthetic dataset tree and return its summary.

    Per experiment: ``per_exp`` release recordings and ``per_exp`` without,
    each rendered once per background. Layout:
      out_dir/images/<bg>/<sample_id>.png
      out_dir/manifest.csv
      out_dir/dataset.json
    """
    if experiments < 1 or per_exp < 1:
        raise InvalidArgumentError("experiments and per_exp must be >= 1")
    for bg in backgrounds:
        if bg not in BACKGROUND_ANCHORS:
            raise InvalidArgumentError(f"unknown background {bg!r}")
    base = params if params is not None else SynthParams(seed=seed)
    base = base.scaled(scale) if scale != 1.0 else base
    out = Path(out_dir)
    for bg in backgrounds:
        (out / "images" / bg).mkdir(parents=True, exist_ok=True)

    records: list = []
    rec_index = 0
    for e in range(experiments):
        exp_id = f"exp{e:02d}"
        for with_release in (True, False):
            for _ in range(per_exp):
                p = dataclasses.replace(base, seed=seed ^ (rec_index + 1))
                matrix, template = synthesize_sample(
                    p, with_release,
                    sample_id=f"{exp_id}_{rec_index:04d}",
                    experiment_id=exp_id,
                )
                for bg in backgrounds:
                    img = false_color(background_subtract(matrix, bg))
                    sid = f"{template.sample_id}_{bg}"
                    rel = f"images/{bg}/{sid}.png"
                    img.save(out / rel)
                    records.append(dataclasses.replace(
                        template, sample_id=sid, background=bg, image_path=rel,
                    ))
                rec_index += 1

    write_manifest(out / "manifest.csv", records)
    geom = base.zone_geometry()
    summary = {
        "seed": seed,
        "scale": scale,
        "experiments": experiments,
        "per_exp": per_exp,
        "backgrounds": list(backgrounds),
        "recordings": rec_index,
        "images": len(records),
        "matrix": {"height": base.height, "width": base.width,
                   "release_rows": list(base.release_rows)},
        "geometry": {
            "width": geom.width,
            "release_rows": list(geom.release_rows),
            "head_rows": geom.head_rows,
            "window": geom.window,
            "stride": geom.stride,
        },
    }
    with (out / "dataset.json").open("w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def load_dataset_geometry(manifest_path: str | Path) -> ZoneGeometry:
    """Zone geometry recorded next to a manifest, defaulting to full scale."""
    meta = Path(manifest_path).parent / "dataset.json"
    if not meta.is_file():
        return ZoneGeometry()
    with meta.open(encoding="utf-8") as fh:
        g = json.load(fh).get("geometry")
    if not g:
        return ZoneGeometry()
    return ZoneGeometry(
        width=g["width"],
        release_rows=tuple(g["release_rows"]),
        head_rows=g["head_rows"],
        window=g["window"],
        stride=g["stride"],
    )
