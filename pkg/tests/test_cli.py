import hashlib
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from fscvpipe.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def tree_digest(root: Path, skip_caches: bool = True) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if not p.is_file() or (skip_caches and p.name == ".cache.json"):
            continue
        h.update(str(p.relative_to(root)).encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def run_ok(runner, args, **kw):
    result = runner.invoke(main, args, catch_exceptions=False, **kw)
    assert result.exit_code == 0, result.output + result.stderr
    return result


# --- synth ---------------------------------------------------------------

def test_synth_writes_counts_and_is_seed_deterministic(runner, tmp_path):
    a1 = ["synth", "--out", str(tmp_path / "d1"), "--experiments", "2",
          "--per-exp", "1", "--seed", "5", "--scale", "0.2"]
    a2 = ["synth", "--out", str(tmp_path / "d2"), "--experiments", "2",
          "--per-exp", "1", "--seed", "5", "--scale", "0.2"]
    r = run_ok(runner, a1)
    assert "4 recordings" in r.stderr and "12 images" in r.stderr
    run_ok(runner, a2)
    assert tree_digest(tmp_path / "d1") == tree_digest(tmp_path / "d2")


def test_synth_refuses_nonempty_dir_without_force(runner, tmp_path):
    out = tmp_path / "d"
    out.mkdir()
    (out / "keep.txt").write_text("hello")
    args = ["synth", "--out", str(out), "--experiments", "1", "--per-exp", "1",
            "--scale", "0.2"]
    refused = runner.invoke(main, args)
    assert refused.exit_code != 0
    assert "--force" in refused.stderr
    run_ok(runner, args + ["--force"])
    assert (out / "manifest.csv").is_file()


def test_synth_rejects_zero_per_exp(runner, tmp_path):
    r = runner.invoke(main, ["synth", "--out", str(tmp_path / "x"),
                             "--per-exp", "0"])
    assert r.exit_code != 0


# --- derive ----------------------------------------------------------------

@pytest.fixture(scope="module")
def cli_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("clidata")
    r = CliRunner().invoke(
        main,
        ["synth", "--out", str(root), "--experiments", "2", "--per-exp", "1",
         "--seed", "8", "--scale", "0.2"],
        catch_exceptions=False,
    )
    assert r.exit_code == 0
    return root


def test_derive_emits_twenty_variants_per_background(runner, cli_dataset, tmp_path):
    out = tmp_path / "v"
    r = run_ok(runner, ["derive", "--manifest", str(cli_dataset / "manifest.csv"),
                        "--out", str(out), "--backgrounds", "A"])
    assert "20 variants" in r.stderr
    assert len(list((out / "A").iterdir())) == 20


def test_derive_method_groups(runner, cli_dataset, tmp_path):
    out = tmp_path / "v"
    run_ok(runner, ["derive", "--manifest", str(cli_dataset / "manifest.csv"),
                    "--out", str(out), "--methods", "globals",
                    "--backgrounds", "A"])
    assert sorted(p.name for p in (out / "A").iterdir()) == [
        "orig", "zone-common", "zone-concat"
    ]


def test_derive_workers_do_not_change_bytes(runner, cli_dataset, tmp_path):
    base = ["derive", "--manifest", str(cli_dataset / "manifest.csv"),
            "--methods", "spectral-fg,spectral-fgroi,spectral-roi,orig"]
    run_ok(runner, base + ["--out", str(tmp_path / "w1"), "--workers", "1"])
    run_ok(runner, base + ["--out", str(tmp_path / "w2"), "--workers", "2"])
    assert tree_digest(tmp_path / "w1") == tree_digest(tmp_path / "w2")


def test_workers_default_comes_from_environment(runner, cli_dataset, tmp_path):
    run_ok(runner, ["derive", "--manifest", str(cli_dataset / "manifest.csv"),
                    "--out", str(tmp_path / "we"), "--methods", "orig"],
           env={"FSCVPIPE_WORKERS": "2"})


# --- foldplan ------------------------------------------------------------------

def test_foldplan_is_deterministic(runner, cli_dataset, tmp_path):
    args = ["foldplan", "--manifest", str(cli_dataset / "manifest.csv"),
            "--k", "2", "--seed", "3"]
    run_ok(runner, args + ["--out", str(tmp_path / "p1.csv")])
    run_ok(runner, args + ["--out", str(tmp_path / "p2.csv")])
    assert (tmp_path / "p1.csv").read_text() == (tmp_path / "p2.csv").read_text()


def test_foldplan_rejects_oversized_k(runner, cli_dataset, tmp_path):
    r = runner.invoke(main, ["foldplan", "--manifest",
                             str(cli_dataset / "manifest.csv"),
                             "--k", "31", "--out", str(tmp_path / "p.csv")])
    assert r.exit_code != 0
    assert "31" in r.stderr


def test_config_file_supplies_defaults_and_flags_win(runner, cli_dataset, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("k: 2\nseed: 3\n")
    run_ok(runner, ["foldplan", "--manifest", str(cli_dataset / "manifest.csv"),
                    "--config", str(cfg), "--out", str(tmp_path / "pc.csv")])
    from fscvpipe.evaluation import FoldPlan

    assert FoldPlan.load(tmp_path / "pc.csv").k == 2
    # explicit flag beats the file
    run_ok(runner, ["foldplan", "--manifest", str(cli_dataset / "manifest.csv"),
                    "--config", str(cfg), "--k", "1",
                    "--out", str(tmp_path / "pf.csv")])
    assert FoldPlan.load(tmp_path / "pf.csv").k == 1


# --- scoring, fusion, eval, report ------------------------------------------------

@pytest.fixture(scope="module")
def cli_scores(cli_dataset, tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cliscore")
    runner = CliRunner()
    manifest = str(cli_dataset / "manifest.csv")
    variants = tmp / "variants"
    plan = tmp / "plan.csv"
    scores = tmp / "scores"
    for args in (
        ["derive", "--manifest", manifest, "--out", str(variants)],
        ["foldplan", "--manifest", manifest, "--k", "2", "--out", str(plan)],
        ["score-baseline", "--variants", str(variants), "--manifest", manifest,
         "--plan", str(plan), "--out", str(scores)],
    ):
        r = runner.invoke(main, args, catch_exceptions=False)
        assert r.exit_code == 0, r.stderr
    return manifest, plan, scores


def test_score_baseline_emits_all_member_files(cli_scores):
    _, _, scores = cli_scores
    files = sorted(p.name for p in scores.iterdir())
    assert len([f for f in files if not f.endswith(".boxes.csv")]) == 63
    assert "detector_A.csv" in files and "detector_C.boxes.csv" in files


def test_fuse_reports_scores_fused(runner, cli_scores, tmp_path):
    manifest, _, scores = cli_scores
    out = tmp_path / "fused"
    r = run_ok(runner, ["fuse", "--scores", str(scores), "--manifest", manifest,
                        "--ensemble", "all-methods", "--out", str(out)])
    assert "Scores Fused: 63" in r.stderr
    payload = json.loads((out / "metrics.json").read_text())
    assert payload["scores_fused"] == 63
    assert set(payload["metrics"]) >= {"accuracy", "auc", "f1",
                                       "sensitivity", "specificity"}
    assert (out / "fused.csv").read_text().startswith("sample_id,")


def test_eval_writes_full_report(runner, cli_scores, tmp_path):
    manifest, plan, scores = cli_scores
    out = tmp_path / "ev"
    r = run_ok(runner, ["eval", "--scores", str(scores), "--manifest", manifest,
                        "--plan", str(plan), "--ensemble", "global",
                        "--out", str(out)])
    assert "Scores Fused: 3" in r.stderr
    payload = json.loads((out / "metrics.json").read_text())
    assert payload["k"] == 2
    assert set(payload["per_member"]) == {"orig:A", "zone-common:A", "zone-concat:A"}
    assert len(payload["per_fold"]) == 2


def test_fuse_rejects_unknown_ensemble(runner, cli_scores, tmp_path):
    manifest, _, scores = cli_scores
    r = runner.invoke(main, ["fuse", "--scores", str(scores), "--manifest",
                             manifest, "--ensemble", "mystery",
                             "--out", str(tmp_path / "x")])
    assert r.exit_code != 0
    assert "mystery" in r.stderr


def test_report_builds_the_results_table(runner, cli_scores, tmp_path):
    manifest, plan, scores = cli_scores
    evs = []
    for name in ("original", "detector-allbg"):
        out = tmp_path / name
        run_ok(runner, ["eval", "--scores", str(scores), "--manifest", manifest,
                        "--plan", str(plan), "--ensemble", name, "--out", str(out)])
        evs += ["--eval", str(out)]
    table = tmp_path / "table.txt"
    run_ok(runner, ["report", *evs, "--out", str(table)])
    text = table.read_text()
    assert "Scores Fused" in text and "Accuracy" in text and "AUC" in text
    assert "original" in text and "detector-allbg" in text
    rows = json.loads(table.with_suffix(".json").read_text())
    assert [r["ensemble"] for r in rows] == ["original", "detector-allbg"]


# --- saliency / zones / patches helpers ----------------------------------------------

def test_saliency_command_writes_the_five_products(runner, cli_dataset, tmp_path):
    img = next((cli_dataset / "images" / "A").glob("*.png"))
    out = tmp_path / "sal"
    run_ok(runner, ["saliency", "--image", str(img), "--method", "spectral",
                    "--out", str(out)])
    stems = sorted(p.name for p in out.iterdir())
    assert [s.split(".", 1)[1] for s in stems] == [
        "spectral.fg.png", "spectral.fgroi.png", "spectral.map.png",
        "spectral.mask.png", "spectral.roi.png",
    ]


def test_zones_command(runner, cli_dataset, tmp_path):
    out = tmp_path / "z"
    run_ok(runner, ["zones", "--manifest", str(cli_dataset / "manifest.csv"),
                    "--out", str(out), "--kind", "common"])
    assert len(list(out.glob("*.common.png"))) == 12
    assert not list(out.glob("*.concat.png"))


def test_patches_command(runner, cli_dataset, tmp_path):
    out = tmp_path / "p"
    run_ok(runner, ["patches", "--manifest", str(cli_dataset / "manifest.csv"),
                    "--out", str(out), "--method", "patch-290"])
    per_bg = [len(list((out / bg / "patch-290" / "images").glob("*.png")))
              for bg in ("A", "B", "C")]
    assert per_bg == [4 * 7] * 3
