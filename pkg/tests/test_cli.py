from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from reeflab import import_coco, load_project
from reeflab.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def run(runner, *args, **kwargs):
    return runner.invoke(main, [str(a) for a in args], **kwargs)


@pytest.fixture
def gt_setup(tmp_path, runner):
    """Synthetic GT document + rendered scenes, via the CLI itself."""
    gt_path = tmp_path / "gt.json"
    scenes = tmp_path / "scenes"
    result = run(
        runner, "gt", "synth", "--images", 3, "--size", "96x96", "--min-blobs", 2,
        "--max-blobs", 4, "--seed", 5, "--out", gt_path, "--render-dir", scenes,
    )
    assert result.exit_code == 0, result.output
    return {"gt": gt_path, "scenes": scenes, "tmp": tmp_path}


@pytest.fixture
def prepared_project(gt_setup, runner):
    project_path = gt_setup["tmp"] / "project.json"
    result = run(
        runner, "project", "new", "--images", gt_setup["scenes"], "--out", project_path,
        "--min-area", 0.0,
    )
    assert result.exit_code == 0, result.output
    result = run(
        runner, "project", "prepare", "--project", project_path,
        "--backend", f"oracle:{gt_setup['gt']}",
    )
    assert result.exit_code == 0, result.output
    return project_path


class TestGtSynth:
    def test_document_validates_and_scenes_rendered(self, gt_setup):
        imported = import_coco(gt_setup["gt"])
        assert len(imported.images) == 3
        assert sorted(p.name for p in gt_setup["scenes"].iterdir()) == [
            "img_0001.png", "img_0002.png", "img_0003.png",
        ]

    def test_seed_required(self, runner, tmp_path):
        result = run(runner, "gt", "synth", "--out", tmp_path / "gt.json")
        assert result.exit_code == 2


class TestProjectCommands:
    def test_new_imports_scenes(self, gt_setup, runner):
        out = gt_setup["tmp"] / "p.json"
        result = run(runner, "project", "new", "--images", gt_setup["scenes"], "--out", out)
        assert result.exit_code == 0
        assert "3 image(s)" in result.output
        project = load_project(out)
        assert [e.image_id for e in project.images] == [1, 2, 3]

    def test_new_reports_corrupt_files(self, gt_setup, runner):
        bad = gt_setup["scenes"] / "zz_bad.png"
        bad.write_text("junk")
        out = gt_setup["tmp"] / "p.json"
        result = run(runner, "project", "new", "--images", gt_setup["scenes"], "--out", out)
        assert result.exit_code == 0
        assert "skipped" in result.stderr
        assert len(load_project(out).images) == 3

    def test_new_with_stride(self, gt_setup, runner):
        out = gt_setup["tmp"] / "p.json"
        result = run(
            runner, "project", "new", "--images", gt_setup["scenes"], "--out", out,
            "--stride", 2,
        )
        assert result.exit_code == 0
        assert len(load_project(out).images) == 2  # indices 0 and 2 of 3

    def test_prepare_requires_backend_flag(self, gt_setup, runner, monkeypatch):
        monkeypatch.delenv("REEFLAB_BACKEND", raising=False)
        out = gt_setup["tmp"] / "p.json"
        run(runner, "project", "new", "--images", gt_setup["scenes"], "--out", out)
        result = run(runner, "project", "prepare", "--project", out)
        assert result.exit_code == 2

    def test_backend_env_var(self, gt_setup, runner, monkeypatch):
        out = gt_setup["tmp"] / "p.json"
        run(runner, "project", "new", "--images", gt_setup["scenes"], "--out", out)
        monkeypatch.setenv("REEFLAB_BACKEND", f"oracle:{gt_setup['gt']}")
        result = run(runner, "project", "prepare", "--project", out)
        assert result.exit_code == 0
        assert all(e.prepared for e in load_project(out).images)

    def test_prepare_marks_images(self, prepared_project):
        assert all(e.prepared for e in load_project(prepared_project).images)


class TestSegmentAndStats:
    def test_segment_auto_inserts_instances(self, prepared_project, gt_setup, runner):
        result = run(
            runner, "segment", "auto", "--project", prepared_project,
            "--backend", f"oracle:{gt_setup['gt']}",
        )
        assert result.exit_code == 0
        project = load_project(prepared_project)
        assert project.total_instance_count() > 0
        assert all(
            inst.source.value == "auto"
            for insts in project.instances.values()
            for inst in insts
        )

    def test_stats_csv_json_figures(self, prepared_project, gt_setup, runner):
        run(
            runner, "segment", "auto", "--project", prepared_project,
            "--backend", f"oracle:{gt_setup['gt']}",
        )
        out = gt_setup["tmp"] / "stats.csv"
        json_out = gt_setup["tmp"] / "stats.json"
        figures = gt_setup["tmp"] / "figs"
        result = run(
            runner, "stats", "--project", prepared_project, "--out", out,
            "--json", json_out, "--figures", figures,
        )
        assert result.exit_code == 0
        assert out.read_bytes().startswith(b"scope,section,key,")
        report = json.loads(json_out.read_text())
        assert report["scope"] == "project" and report["coverage"] > 0
        assert sorted(p.name for p in figures.iterdir()) == [
            "coverage.png", "health_summary.png", "label_distribution.png",
        ]

    def test_single_image_stats(self, prepared_project, gt_setup, runner):
        out = gt_setup["tmp"] / "one.csv"
        result = run(
            runner, "stats", "--project", prepared_project, "--image", 2, "--out", out,
        )
        assert result.exit_code == 0
        assert b"image:2," in out.read_bytes()


class TestExport:
    def test_coco_roundtrip(self, prepared_project, gt_setup, runner):
        run(
            runner, "segment", "auto", "--project", prepared_project,
            "--backend", f"oracle:{gt_setup['gt']}",
        )
        out = gt_setup["tmp"] / "export.json"
        result = run(runner, "export", "coco", "--project", prepared_project, "--out", out)
        assert result.exit_code == 0
        imported = import_coco(out)
        assert len(imported.instances) == load_project(prepared_project).total_instance_count()

    def test_csv(self, prepared_project, gt_setup, runner):
        out = gt_setup["tmp"] / "instances.csv"
        result = run(
            runner, "export", "csv", "--project", prepared_project,
            "--kind", "instances", "--out", out,
        )
        assert result.exit_code == 0
        assert out.read_bytes().startswith(b"image,instance_id,")

    def test_overlay_single_and_all(self, prepared_project, gt_setup, runner):
        out = gt_setup["tmp"] / "overlay.png"
        result = run(
            runner, "export", "overlay", "--project", prepared_project,
            "--image", 1, "--out", out,
        )
        assert result.exit_code == 0 and out.exists()
        out_dir = gt_setup["tmp"] / "overlays"
        result = run(
            runner, "export", "overlay", "--project", prepared_project, "--out-dir", out_dir,
        )
        assert result.exit_code == 0
        assert len(list(out_dir.iterdir())) == 3

    def test_overlay_usage_error_without_target(self, prepared_project, runner):
        result = run(runner, "export", "overlay", "--project", prepared_project)
        assert result.exit_code == 2


class TestSim:
    def test_sparse_final_row_is_budget(self, gt_setup, runner):
        out = gt_setup["tmp"] / "curve.csv"
        result = run(
            runner, "sim", "sparse", "--gt", gt_setup["gt"], "--image", 1,
            "--points", 5000, "--seed", 42, "--out", out,
        )
        assert result.exit_code == 0
        last = out.read_text().splitlines()[-1]
        assert last.startswith("sparse,42,5000,")

    def test_sparse_requires_seed(self, gt_setup, runner, tmp_path):
        result = run(
            runner, "sim", "sparse", "--gt", gt_setup["gt"], "--image", 1,
            "--points", 10, "--out", tmp_path / "c.csv",
        )
        assert result.exit_code == 2

    def test_multi_image_gt_needs_image_flag(self, gt_setup, runner, tmp_path):
        result = run(
            runner, "sim", "sparse", "--gt", gt_setup["gt"],
            "--points", 10, "--seed", 1, "--out", tmp_path / "c.csv",
        )
        assert result.exit_code == 1

    def test_prompt_curve(self, gt_setup, runner):
        out = gt_setup["tmp"] / "prompt.csv"
        result = run(
            runner, "sim", "prompt", "--gt", gt_setup["gt"], "--image", 1,
            "--budget", 6, "--seed", 7, "--backend", f"oracle:{gt_setup['gt']}",
            "--out", out,
        )
        assert result.exit_code == 0
        rows = out.read_text().splitlines()
        assert rows[0] == "method,seed,effort,accuracy"
        assert rows[-1].split(",")[-1] == "1.0"

    def test_auto_single_row(self, gt_setup, runner):
        out = gt_setup["tmp"] / "auto.csv"
        result = run(
            runner, "sim", "auto", "--gt", gt_setup["gt"], "--image", 1,
            "--backend", f"oracle:{gt_setup['gt']}", "--out", out,
        )
        assert result.exit_code == 0
        assert out.read_text().splitlines()[1] == "auto,0,0,1.0"

    def test_byte_identical_reruns(self, gt_setup, runner):
        outputs = []
        for name in ("one", "two"):
            out = gt_setup["tmp"] / f"{name}.csv"
            plot = gt_setup["tmp"] / f"{name}.png"
            result = run(
                runner, "sim", "sparse", "--gt", gt_setup["gt"], "--image", 2,
                "--points", 500, "--seed", 99, "--out", out, "--plot", plot,
                "--unlabeled", "background",
            )
            assert result.exit_code == 0
            outputs.append((out.read_bytes(), plot.read_bytes()))
        assert outputs[0] == outputs[1]


class TestEvalAndAggregate:
    def test_mae_identical_documents(self, gt_setup, runner):
        result = run(runner, "eval", "mae", "--pred", gt_setup["gt"], "--gt", gt_setup["gt"])
        assert result.exit_code == 0
        assert result.output.strip() == "0.0"

    def test_mae_mismatched_ids(self, gt_setup, runner, tmp_path):
        other = tmp_path / "other.json"
        run(
            runner, "gt", "synth", "--images", 2, "--size", "96x96", "--seed", 6,
            "--out", other,
        )
        result = run(runner, "eval", "mae", "--pred", other, "--gt", gt_setup["gt"])
        assert result.exit_code == 1

    def test_aggregate(self, runner, tmp_path):
        results = tmp_path / "results.csv"
        results.write_text(
            "location,image,accuracy\n"
            "Hong Kong,1,0.8888\nHong Kong,2,0.8888\nPalau,1,0.9061\n"
        )
        out = tmp_path / "agg.csv"
        plot = tmp_path / "agg.png"
        result = run(
            runner, "aggregate", "--results", results, "--out", out, "--plot", plot,
        )
        assert result.exit_code == 0
        assert out.read_text() == (
            "location,n_images,mean_accuracy\nHong Kong,2,0.8888\nPalau,1,0.9061\n"
        )
        assert plot.exists()

    def test_aggregate_missing_columns(self, runner, tmp_path):
        results = tmp_path / "results.csv"
        results.write_text("site,value\nA,0.5\n")
        result = run(
            runner, "aggregate", "--results", results, "--out", tmp_path / "agg.csv",
        )
        assert result.exit_code == 1


class TestUsage:
    def test_unknown_flag(self, runner):
        result = run(runner, "stats", "--bogus")
        assert result.exit_code == 2

    def test_help(self, runner):
        result = run(runner, "--help")
        assert result.exit_code == 0
        for name in ("project", "segment", "stats", "export", "sim", "eval", "aggregate", "serve"):
            assert name in result.output
