"""Release gate: one test per ship criterion.

Run with ``pytest -v`` — each line below is the pass/fail verdict for one
criterion.  The end-to-end check builds a full synthetic benchmark through
the command line, so this module takes several minutes; everything else is
seconds.
"""

import json
import math
import statistics
import time
from collections import namedtuple

import numpy as np
import pytest
from click.testing import CliRunner

from fscvpipe.cli import main
from fscvpipe.evaluation import check_grouping, compute_metrics, grouped_kfold, roc_auc
from fscvpipe.fusion import (
    DetectionBox,
    ScoreVector,
    detector_decision,
    max_rule_patches,
    standard_ensembles,
    sum_fuse,
)
from fscvpipe.imaging import ImageMatrix, SaliencyMap, dwt2, fft2, idwt2, ifft2
from fscvpipe.pipeline import member_scores_path
from fscvpipe.regions import auto_patches, pad_to_square, zone_common, zone_concat
from fscvpipe.saliency import (
    METHODS,
    compute_saliency,
    cosaliency,
    markov_equilibrium,
)
from fscvpipe.saliency.maskops import fg_roi, foreground, roi, threshold_mask


# --- criterion 1: mask algebra vs per-pixel oracles -------------------------------

def _oracle_foreground(px, mask):
    out = np.zeros_like(px)
    for y in range(px.shape[0]):
        for x in range(px.shape[1]):
            if mask[y, x]:
                out[y, x] = px[y, x]
    return out


def _oracle_fg_roi(px, mask, col_th, row_th):
    keep_cols = [x for x in range(mask.shape[1]) if not (mask[:, x].sum() < col_th)]
    keep_rows = [y for y in range(mask.shape[0]) if not (mask[y, :].sum() < row_th)]
    if not keep_cols or not keep_rows:
        return None
    return px[np.ix_(keep_rows, keep_cols)]


def test_criterion_1_mask_stages_match_bruteforce_bit_exactly():
    rng = np.random.default_rng(20101)
    exercised_full_path = 0
    for trial in range(200):
        h, w = int(rng.integers(2, 24)), int(rng.integers(2, 24))
        px = rng.uniform(0.0, 1.0, (h, w))
        sal = rng.uniform(0.0, 1.0, (h, w))
        th = float(rng.uniform(0.05, 0.95))
        img = ImageMatrix(px)
        mask = threshold_mask(SaliencyMap(sal), th)
        col_th = float(rng.integers(0, h + 1))

        fg = foreground(img, mask)
        assert np.array_equal(fg.pixels, _oracle_foreground(px, mask.values))

        want = _oracle_fg_roi(px, mask.values, col_th, col_th)
        want_fg = _oracle_fg_roi(_oracle_foreground(px, mask.values),
                                 mask.values, col_th, col_th)
        if want is None:
            continue
        got = fg_roi(img, mask, col_th)
        assert np.array_equal(got.pixels, want)

        full = roi(img, mask, col_th)
        assert np.array_equal(full.pixels, want_fg)
        # composition identity: roi == fg_roi applied to the foreground image
        assert np.array_equal(full.pixels, fg_roi(fg, mask, col_th).pixels)
        exercised_full_path += 1
    assert exercised_full_path > 100


# --- criterion 2: zone and patch geometry -----------------------------------------

def test_criterion_2_zone_and_patch_geometry():
    rng = np.random.default_rng(20102)
    img = ImageMatrix(rng.uniform(0, 1, (600, 875, 3)))

    common = zone_common(img)
    concat = zone_concat(img)
    assert (common.height, common.width) == (200, 875)
    assert (concat.height, concat.width) == (290, 875)

    patches = auto_patches(concat, window_w=200, stride=135)
    offsets = [off for _, off in patches.patches]
    assert offsets == [0, 135, 270, 405, 540, 675]
    for patch, off in patches.patches:
        assert np.array_equal(patch.pixels, concat.pixels[:, off:off + 200])

    for patch, _ in patches.patches:
        sq = pad_to_square(patch, 290)
        assert (sq.height, sq.width) == (290, 290)
        assert np.array_equal(sq.pixels[:, :200], patch.pixels)
        assert not sq.pixels[:, 200:].any()


# --- criterion 3: saliency sanity suite -------------------------------------------

def _disk(h, w, cy, cx, r, value=1.0):
    px = np.zeros((h, w, 3))
    yy, xx = np.mgrid[0:h, 0:w]
    px[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = value
    return ImageMatrix(px)


def _stationary_by_eig(transition):
    vals, vecs = np.linalg.eig(transition.T)
    idx = np.argmin(np.abs(vals - 1.0))
    pi = np.real(vecs[:, idx])
    return pi / pi.sum()


def test_criterion_3_saliency_sanity_suite():
    rng = np.random.default_rng(20103)

    # constant input: every method must return an all-zero or degenerate map
    flat = ImageMatrix(np.full((80, 96, 3), 0.4))
    for method in METHODS:
        out = compute_saliency(flat, method)
        assert out.degenerate or not out.data.any()

    # planted singularities, one per method, plus the [0, 1] range check
    def in_range(m):
        return float(m.data.min()) >= 0.0 and float(m.data.max()) <= 1.0

    m = compute_saliency(_disk(128, 128, 56, 88, 12), "simpsal")
    ay, ax = np.unravel_index(np.argmax(m.data), m.data.shape)
    assert (ay - 56) ** 2 + (ax - 88) ** 2 <= 12 ** 2 and in_range(m)

    m = compute_saliency(_disk(128, 128, 56, 88, 12), "gbvs")
    ay, ax = np.unravel_index(np.argmax(m.data), m.data.shape)
    assert 40 <= ay <= 72 and 72 <= ax <= 104 and in_range(m)

    px = np.zeros((100, 140, 3))
    px[30, 90] = 1.0
    m = compute_saliency(ImageMatrix(px), "spectral")
    ay, ax = np.unravel_index(np.argmax(m.data), m.data.shape)
    assert abs(ay - 30) <= 2 and abs(ax - 90) <= 2 and in_range(m)

    px = np.full((160, 160, 3), 0.5)
    yy, xx = np.mgrid[0:80, 0:80]
    px[:80, :80] = (0.5 + 0.45 * np.sin(xx * 1.3) * np.sin(yy * 0.9))[..., None]
    m = compute_saliency(ImageMatrix(px), "wavelet")
    assert m.data[:80, :80].mean() > 2 * m.data[80:, :].mean() and in_range(m)

    h, w, cy, cx, r = 96, 120, 40, 70, 11
    yy, xx = np.mgrid[0:h, 0:w]
    disk = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    group = []
    for _ in range(3):
        noise = rng.uniform(0.1, 0.35, (h, w, 3))
        noise[disk] = [0.95, 0.85, 0.1]
        group.append(ImageMatrix(noise))
    for m in cosaliency(group):
        assert m.data[disk].mean() > 2 * m.data[~disk].mean() and in_range(m)

    # equilibrium distributions: unit mass, and dense eigen-solve agreement
    for n in (9, 25, 81, 144):  # lattices 3x3 .. 12x12
        raw = rng.uniform(0.05, 1.0, (n, n))
        t = raw / raw.sum(axis=1, keepdims=True)
        pi = markov_equilibrium(t)
        assert abs(pi.sum() - 1.0) <= 1e-9
        assert np.abs(pi - _stationary_by_eig(t)).max() < 1e-6


# --- criterion 4: transform round-trips -------------------------------------------

def test_criterion_4_fft_and_dwt_round_trips():
    rng = np.random.default_rng(20104)
    worst_fft = 0.0
    for _ in range(100):
        a = rng.standard_normal((int(rng.integers(2, 40)), int(rng.integers(2, 40))))
        worst_fft = max(worst_fft, np.abs(ifft2(fft2(a)).real - a).max())
    assert worst_fft < 1e-9

    worst_dwt = 0.0
    for i in range(100):
        family = ("haar", "db4")[i % 2]
        h, w = int(rng.integers(4, 48)), int(rng.integers(4, 48))
        a = rng.standard_normal((h, w))
        levels = int(rng.integers(1, 4))
        back = idwt2(dwt2(a, family=family, levels=levels))
        worst_dwt = max(worst_dwt, np.abs(back - a).max())
    assert worst_dwt < 1e-8


# --- criterion 5: fusion rules vs brute force --------------------------------------

def test_criterion_5_fusion_rules_and_decision_table():
    rng = np.random.default_rng(20105)
    for _ in range(1000):
        n = int(rng.integers(1, 12))
        raw = rng.uniform(0.0, 5.0, (n, 2))
        vecs = [ScoreVector(float(a), float(b)) for a, b in raw]

        fused = sum_fuse(vecs)
        assert fused.no_release == math.fsum(v.no_release for v in vecs)
        assert fused.release == math.fsum(v.release for v in vecs)

        # permutation invariance (exact: fsum is order-free)
        perm = [vecs[i] for i in rng.permutation(n)]
        refused = sum_fuse(perm)
        assert (refused.no_release, refused.release) == (fused.no_release, fused.release)

        # positive scaling never flips the argmax
        c = float(rng.uniform(0.01, 100.0))
        scaled = sum_fuse([ScoreVector(v.no_release * c, v.release * c) for v in vecs])
        assert scaled.label == fused.label

        # max rule: first patch with the strictly largest release score wins
        best = vecs[0]
        for v in vecs[1:]:
            if v.release > best.release:
                best = v
        assert max_rule_patches(vecs) is best

    # decision table, including the empty and boundary cases
    assert detector_decision([DetectionBox(1, 1, 4, 4, 0.7)]) == "release"
    assert detector_decision([DetectionBox(1, 1, 4, 4, 0.3)]) == "no-release"
    assert detector_decision([]) == "no-release"
    assert detector_decision([DetectionBox(1, 1, 4, 4, 0.5)]) == "no-release"
    many = [DetectionBox(0, 0, 2, 2, 0.2), DetectionBox(5, 5, 2, 2, 0.51)]
    assert detector_decision(many) == "release"


# --- criterion 6: evaluation protocol ----------------------------------------------

_Rec = namedtuple("_Rec", "sample_id experiment_id")


def test_criterion_6_folds_metrics_and_auc_anchors():
    rng = np.random.default_rng(20106)
    for k, n_exp, seed in ((2, 4, 0), (5, 11, 3), (10, 30, 9)):
        records = [_Rec(f"e{e}_s{s}", f"e{e}")
                   for e in range(n_exp) for s in range(int(rng.integers(1, 6)))]
        plan = grouped_kfold(records, k=k, seed=seed)
        check_grouping(plan, records)  # raises on any grouping violation
        assert set(plan.assignment.values()) == set(range(k))

    labels = ["release", "release", "no-release", "no-release"]
    preds = ["release", "no-release", "no-release", "no-release"]
    m = compute_metrics(labels, preds, [0.9, 0.4, 0.2, 0.1])
    assert m.sensitivity == 0.5
    assert m.specificity == 1.0
    assert m.accuracy == 0.75
    assert m.f1 == pytest.approx(2 / 3, abs=1e-15)
    assert (m.tp, m.tn, m.fp, m.fn) == (1, 2, 0, 1)

    assert roc_auc(labels, [0.9, 0.8, 0.2, 0.1]) == 1.0
    assert roc_auc(labels, [0.5, 0.5, 0.5, 0.5]) == 0.5


# --- criteria 7 and 9: the full synthetic benchmark --------------------------------

@pytest.fixture(scope="module")
def benchmark_run(tmp_path_factory):
    """synth -> derive -> foldplan -> score-baseline -> fuse -> eval, timed."""
    root = tmp_path_factory.mktemp("bench")
    data, variants = root / "data", root / "variants"
    plan, scores = root / "plan.csv", root / "scores"
    fused, evald = root / "fused", root / "eval"
    runner = CliRunner()
    steps = [
        ["synth", "--out", str(data), "--experiments", "30", "--per-exp", "20",
         "--seed", "97", "--scale", "0.2"],
        ["derive", "--manifest", str(data / "manifest.csv"), "--out", str(variants),
         "--workers", "1"],
        ["foldplan", "--manifest", str(data / "manifest.csv"), "--k", "10",
         "--out", str(plan)],
        ["score-baseline", "--variants", str(variants),
         "--manifest", str(data / "manifest.csv"), "--plan", str(plan),
         "--out", str(scores)],
        ["fuse", "--scores", str(scores), "--manifest", str(data / "manifest.csv"),
         "--ensemble", "all-methods", "--out", str(fused)],
        ["eval", "--scores", str(scores), "--manifest", str(data / "manifest.csv"),
         "--plan", str(plan), "--ensemble", "all-methods", "--out", str(evald)],
    ]
    t0 = time.perf_counter()
    for args in steps:
        result = runner.invoke(main, args, catch_exceptions=False)
        assert result.exit_code == 0, f"{args[0]} failed:\n{result.stderr}"
    elapsed = time.perf_counter() - t0
    report = json.loads((evald / "metrics.json").read_text())
    return {"elapsed": elapsed, "variants": variants, "scores": scores,
            "report": report}


def test_criterion_7_end_to_end_benchmark_under_budget(benchmark_run):
    elapsed = benchmark_run["elapsed"]
    assert elapsed < 900.0, f"pipeline took {elapsed:.0f}s, budget is 900s"

    report = benchmark_run["report"]
    assert report["scores_fused"] == 63
    fused_acc = report["pooled"]["accuracy"]
    member_accs = [m["accuracy"] for m in report["per_member"].values()]
    assert len(member_accs) == 63
    median_acc = statistics.median(member_accs)
    assert fused_acc >= median_acc, (
        f"fused accuracy {fused_acc:.4f} fell below the median "
        f"single-member accuracy {median_acc:.4f}"
    )


def test_criterion_9_variant_and_member_counts(benchmark_run):
    variants = benchmark_run["variants"]
    per_bg = {bg: sorted(p.name for p in (variants / bg).iterdir())
              for bg in ("A", "B", "C")}
    assert all(len(names) == 20 for names in per_bg.values())
    assert sum(len(names) for names in per_bg.values()) == 60
    assert per_bg["A"] == per_bg["B"] == per_bg["C"]

    ensembles = standard_ensembles()
    sizes = {name: len(cfg.members) for name, cfg in ensembles.items()}
    assert sizes == {
        "original": 1,
        "global": 3,
        "global-allbg": 9,
        "patch-allbg": 6,
        "detector-allbg": 3,
        "saliency": 15,
        "cnn-allbg": 60,
        "all-methods": 63,
    }

    # every member named by the bookkeeping has a real score file on disk
    scores = benchmark_run["scores"]
    for cfg in ensembles.values():
        for member in cfg.members:
            assert member_scores_path(scores, member.method_id,
                                      member.background).is_file()


# --- criterion 8: throughput budgets ------------------------------------------------

def test_criterion_8_fusion_and_saliency_throughput():
    rng = np.random.default_rng(20108)
    vecs = [ScoreVector(float(a), float(b))
            for a, b in rng.uniform(0.0, 1.0, (63, 2))]
    reps = 500
    timings = []
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(reps):
            sum_fuse(vecs)
        timings.append((time.perf_counter() - t0) / reps)
    per_image = min(timings)
    assert per_image < 1e-3, f"63-member fusion took {per_image * 1e3:.3f} ms"

    img = ImageMatrix(np.random.default_rng(5).uniform(0, 1, (600, 875, 3)))
    for method in METHODS:
        t0 = time.perf_counter()
        compute_saliency(img, method)
        dt = time.perf_counter() - t0
        assert dt < 2.0, f"{method} took {dt:.2f}s on a 875x600 image"
