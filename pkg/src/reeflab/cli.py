"""Batch CLI: project management, segmentation, statistics, export,
simulation, and the HTTP server.

Exit codes: 0 success, 1 domain error, 2 usage error.  Randomized commands
require --seed and are byte-deterministic given it.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import __version__
from .analytics import image_stats, project_stats
from .backends import create_backend
from .errors import NotFoundError, ReefLabError, ValidationError
from .evaluation import (
    SimCurve,
    aggregate_locations,
    evaluate_auto,
    mae,
    simulate_prompts,
    simulate_sparse,
)
from .figures import (
    save_curve_figure,
    save_locations_figure,
    save_stats_figures,
)
from .gt import GroundTruth, load_ground_truth
from .interchange import (
    curve_csv,
    export_coco_bytes,
    instances_csv,
    locations_csv,
    render_overlay,
    report_csv,
    stats_csv,
)
from .project import (
    InstanceSource,
    ProjectConfig,
    create_project,
    load_project,
    sample_images,
    save_project,
)
from .synthetic import corpus_to_coco, make_corpus, scene_image

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".webp")

_backend_option = click.option(
    "--backend",
    "backend_descriptor",
    required=True,
    envvar="REEFLAB_BACKEND",
    help="Backend descriptor: oracle:<gt-path>[,erosion=N] or subprocess:<command>. "
    "Defaults to $REEFLAB_BACKEND.",
)


def domain_errors(fn):
    """Map domain errors to exit code 1 with a clean message."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ReefLabError as exc:
            raise click.ClickException(str(exc))

    return wrapper


def _collect_image_paths(sources: tuple[str, ...]) -> list[Path]:
    paths: list[Path] = []
    for source in sources:
        p = Path(source)
        if p.is_dir():
            paths.extend(
                child for child in sorted(p.iterdir()) if child.suffix.lower() in IMAGE_SUFFIXES
            )
        else:
            paths.append(p)
    return paths


def _resolve_image(project, project_path: Path, image_id: int) -> Path:
    entry = project.image(image_id)
    return project_path.parent / entry.path


def _select_gt(gts: dict[int, GroundTruth], image_id: int | None) -> GroundTruth:
    if image_id is None:
        if len(gts) == 1:
            return next(iter(gts.values()))
        raise ValidationError(
            f"ground truth holds images {sorted(gts)}; pick one with --image"
        )
    if image_id not in gts:
        raise NotFoundError(f"ground truth has no image {image_id}")
    return gts[image_id]


@click.group()
@click.version_option(version=__version__, prog_name="reeflab")
def main():
    """Dense-mask reef image labeling, statistics, and effort simulation."""


# -- project ----------------------------------------------------------------


@main.group()
def project():
    """Create and prepare projects."""


@project.command("new")
@click.option("--images", "sources", multiple=True, required=True,
              type=click.Path(exists=True), help="Image file or directory (repeatable).")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Project file to write.")
@click.option("--stride", default=1, show_default=True, help="Keep every Nth image (sorted).")
@click.option("--site", default=None, help="Optional collection-site tag for all images.")
@click.option("--min-area", "min_area_fraction", default=0.01, show_default=True,
              help="Auto-segmentation minimum area fraction.")
@click.option("--confidence", "confidence_threshold", default=0.0, show_default=True,
              help="Auto-segmentation confidence threshold.")
@domain_errors
def project_new(sources, out_path, stride, site, min_area_fraction, confidence_threshold):
    """Import images into a new project file."""
    out = Path(out_path)
    paths = sample_images(_collect_image_paths(sources), stride)
    config = ProjectConfig(
        min_area_fraction=min_area_fraction, confidence_threshold=confidence_threshold
    )
    proj, problems = create_project(paths, config=config, base_dir=out.parent, site=site)
    for problem in problems:
        click.echo(f"skipped {problem.path}: {problem.reason}", err=True)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_project(proj, out)
    click.echo(f"created {out} with {len(proj.images)} image(s), {len(problems)} skipped")


@project.command("prepare")
@click.option("--project", "project_path", required=True, type=click.Path(exists=True))
@_backend_option
@domain_errors
def project_prepare(project_path, backend_descriptor):
    """Run backend preparation for every image and record it."""
    path = Path(project_path)
    proj = load_project(path)
    with create_backend(backend_descriptor) as backend:
        for entry in proj.images:
            backend.prepare(entry.image_id, _resolve_image(proj, path, entry.image_id))
            proj.mark_prepared(entry.image_id)
    save_project(proj, path)
    click.echo(f"prepared {len(proj.images)} image(s)")


# -- segmentation -------------------------------------------------------------


@main.group()
def segment():
    """Run the segmentation backend over project images."""


@segment.command("auto")
@click.option("--project", "project_path", required=True, type=click.Path(exists=True))
@_backend_option
@click.option("--image", "image_id", type=int, default=None, help="Restrict to one image.")
@click.option("--min-area", "min_area_fraction", type=float, default=None,
              help="Override the project's minimum area fraction.")
@click.option("--confidence", "confidence_threshold", type=float, default=None,
              help="Override the project's confidence threshold.")
@domain_errors
def segment_auto(project_path, backend_descriptor, image_id, min_area_fraction,
                 confidence_threshold):
    """Insert automatic mask proposals as instances (source=auto)."""
    path = Path(project_path)
    proj = load_project(path)
    min_area = (
        proj.config.min_area_fraction if min_area_fraction is None else min_area_fraction
    )
    threshold = (
        proj.config.confidence_threshold
        if confidence_threshold is None
        else confidence_threshold
    )
    entries = [proj.image(image_id)] if image_id is not None else proj.images
    with create_backend(backend_descriptor) as backend:
        for entry in entries:
            if not entry.prepared:
                raise ValidationError(
                    f"image {entry.image_id} is not prepared; run `reeflab project prepare` first"
                )
            backend.prepare(entry.image_id, _resolve_image(proj, path, entry.image_id))
            proposals = backend.auto_segment(entry.image_id, min_area, threshold)
            for proposal in proposals:
                proj.add_instance(
                    entry.image_id,
                    proposal.mask,
                    source=InstanceSource.AUTO,
                    confidence=proposal.confidence,
                )
            click.echo(f"image {entry.image_id}: {len(proposals)} proposal(s) added")
    save_project(proj, path)


# -- statistics ----------------------------------------------------------------


@main.command()
@click.option("--project", "project_path", required=True, type=click.Path(exists=True))
@click.option("--image", "image_id", type=int, default=None, help="Report one image only.")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Stats CSV to write.")
@click.option("--json", "json_path", type=click.Path(), default=None,
              help="Also write the report as JSON.")
@click.option("--figures", "figures_dir", type=click.Path(), default=None,
              help="Also render coverage/label/health charts into this directory.")
@domain_errors
def stats(project_path, image_id, out_path, json_path, figures_dir):
    """Write the coverage/distribution/health report as CSV (and figures)."""
    proj = load_project(project_path)
    names = {label.id: label.name for label in proj.labels}
    if image_id is not None:
        report = image_stats(proj, image_id)
        body = report_csv(report, names)
    else:
        report = project_stats(proj)
        body = stats_csv(proj)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(body)
    click.echo(f"wrote {out}")
    if json_path is not None:
        Path(json_path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        click.echo(f"wrote {json_path}")
    if figures_dir is not None:
        labels = {label.id: label for label in proj.labels}
        for figure in save_stats_figures(report, labels, figures_dir):
            click.echo(f"wrote {figure}")


# -- export ---------------------------------------------------------------------


@main.group()
def export():
    """Export annotations and reports."""


@export.command("coco")
@click.option("--project", "project_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@domain_errors
def export_coco_cmd(project_path, out_path):
    """Write the project as a COCO JSON document."""
    proj = load_project(project_path)
    Path(out_path).write_bytes(export_coco_bytes(proj))
    click.echo(f"wrote {out_path}")


@export.command("csv")
@click.option("--project", "project_path", required=True, type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["instances", "stats"]), default="instances",
              show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@domain_errors
def export_csv_cmd(project_path, kind, out_path):
    """Write the instance table or the statistics table."""
    proj = load_project(project_path)
    body = instances_csv(proj) if kind == "instances" else stats_csv(proj)
    Path(out_path).write_bytes(body)
    click.echo(f"wrote {out_path}")


@export.command("overlay")
@click.option("--project", "project_path", required=True, type=click.Path(exists=True))
@click.option("--image", "image_id", type=int, default=None,
              help="Render one image (requires --out).")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--out-dir", "out_dir", type=click.Path(), default=None,
              help="Render every image into this directory.")
@domain_errors
def export_overlay_cmd(project_path, image_id, out_path, out_dir):
    """Render label-colored mask overlays over the source images."""
    path = Path(project_path)
    proj = load_project(path)
    if (image_id is None) == (out_dir is None):
        raise click.UsageError("pass either --image with --out, or --out-dir")
    targets = [proj.image(image_id)] if image_id is not None else proj.images
    for entry in targets:
        png = render_overlay(
            _resolve_image(proj, path, entry.image_id).read_bytes(),
            proj.image_instances(entry.image_id),
            proj.labels,
        )
        if image_id is not None:
            if out_path is None:
                raise click.UsageError("--image needs --out")
            destination = Path(out_path)
        else:
            destination = Path(out_dir) / f"{Path(entry.path).stem}_overlay.png"
            destination.parent.mkdir(parents=True, exist_ok=True)
        destination.write_bytes(png)
        click.echo(f"wrote {destination}")


# -- simulation -------------------------------------------------------------------


@main.group()
def sim():
    """Annotation-effort simulators (accuracy-vs-effort curves)."""


def _write_curve(curve: SimCurve, out_path: str, plot_path: str | None, title: str) -> None:
    Path(out_path).write_bytes(curve_csv(curve))
    click.echo(f"wrote {out_path}")
    if plot_path is not None:
        save_curve_figure(curve, plot_path, title=title)
        click.echo(f"wrote {plot_path}")


@sim.command("sparse")
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--image", "image_id", type=int, default=None)
@click.option("--points", "n_points", required=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--plot", "plot_path", type=click.Path(), default=None)
@click.option("--unlabeled", type=click.Choice(["incorrect", "background"]),
              default="incorrect", show_default=True,
              help="How unlabeled pixels count toward accuracy.")
@domain_errors
def sim_sparse(gt_path, image_id, n_points, seed, out_path, plot_path, unlabeled):
    """Randomly scattered correctly-labeled points."""
    gt = _select_gt(load_ground_truth(gt_path), image_id)
    curve = simulate_sparse(gt, n_points, seed, unlabeled=unlabeled)
    _write_curve(curve, out_path, plot_path, f"sparse points, image {gt.image_id}")


@sim.command("prompt")
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--image", "image_id", type=int, default=None)
@click.option("--budget", required=True, type=int)
@click.option("--seed", required=True, type=int)
@_backend_option
@click.option("--image-path", "image_path", type=click.Path(exists=True), default=None,
              help="Image file for backends that need pixels (subprocess).")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--plot", "plot_path", type=click.Path(), default=None)
@domain_errors
def sim_prompt(gt_path, image_id, budget, seed, backend_descriptor, image_path, out_path,
               plot_path):
    """Iterative point-prompt refinement against a backend."""
    gt = _select_gt(load_ground_truth(gt_path), image_id)
    with create_backend(backend_descriptor) as backend:
        backend.prepare(gt.image_id, image_path)
        curve = simulate_prompts(gt, backend, budget, seed)
    _write_curve(curve, out_path, plot_path, f"point prompts, image {gt.image_id}")


@sim.command("auto")
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--image", "image_id", type=int, default=None)
@_backend_option
@click.option("--image-path", "image_path", type=click.Path(exists=True), default=None)
@click.option("--min-area", "min_area_fraction", type=float, default=0.0, show_default=True)
@click.option("--confidence", "confidence_threshold", type=float, default=0.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--plot", "plot_path", type=click.Path(), default=None)
@domain_errors
def sim_auto(gt_path, image_id, backend_descriptor, image_path, min_area_fraction,
             confidence_threshold, out_path, plot_path):
    """Accuracy of unrefined automatic proposals (zero manual effort)."""
    gt = _select_gt(load_ground_truth(gt_path), image_id)
    with create_backend(backend_descriptor) as backend:
        backend.prepare(gt.image_id, image_path)
        accuracy = evaluate_auto(gt, backend, min_area_fraction, confidence_threshold)
    curve = SimCurve(method="auto", seed=0, points=((0, accuracy),))
    _write_curve(curve, out_path, plot_path, f"automatic proposals, image {gt.image_id}")


# -- evaluation --------------------------------------------------------------------


@main.group(name="eval")
def eval_group():
    """Pixel-level metrics between annotation sets."""


@eval_group.command("mae")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@domain_errors
def eval_mae(pred_path, gt_path):
    """Mean absolute error between two mask sets (mean over shared images)."""
    pred = load_ground_truth(pred_path)
    truth = load_ground_truth(gt_path)
    if set(pred) != set(truth):
        raise ValidationError(
            f"image id sets differ: {sorted(pred)} vs {sorted(truth)}"
        )
    values = [mae(pred[i].union, truth[i].union) for i in sorted(truth)]
    click.echo(str(sum(values) / len(values)))


@main.command()
@click.option("--results", "results_path", required=True, type=click.Path(exists=True),
              help="CSV with 'location' and 'accuracy' columns.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--plot", "plot_path", type=click.Path(), default=None)
@domain_errors
def aggregate(results_path, out_path, plot_path):
    """Average per-image accuracies by location."""
    import csv as _csv

    grouped: dict[str, list[float]] = {}
    with open(results_path, newline="", encoding="utf-8") as handle:
        reader = _csv.DictReader(handle)
        if reader.fieldnames is None or not {"location", "accuracy"} <= set(reader.fieldnames):
            raise ValidationError("results CSV needs 'location' and 'accuracy' columns")
        for row in reader:
            grouped.setdefault(row["location"], []).append(float(row["accuracy"]))
    results = aggregate_locations(grouped)
    Path(out_path).write_bytes(locations_csv(results))
    click.echo(f"wrote {out_path}")
    if plot_path is not None:
        save_locations_figure(results, plot_path)
        click.echo(f"wrote {plot_path}")


# -- ground truth / server -----------------------------------------------------------


@main.group()
def gt():
    """Ground-truth utilities."""


@gt.command("synth")
@click.option("--images", "n_images", default=10, show_default=True, type=int)
@click.option("--size", default="96x96", show_default=True, help="Image size WxH.")
@click.option("--min-blobs", default=3, show_default=True, type=int)
@click.option("--max-blobs", default=10, show_default=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--render-dir", "render_dir", type=click.Path(), default=None,
              help="Also write synthetic scene PNGs here.")
@domain_errors
def gt_synth(n_images, size, min_blobs, max_blobs, seed, out_path, render_dir):
    """Generate seeded blob ground truth as a COCO document."""
    try:
        width, height = (int(v) for v in size.lower().split("x"))
    except ValueError:
        raise click.UsageError(f"bad --size {size!r}, want WxH")
    corpus = make_corpus(n_images, width, height, blobs=(min_blobs, max_blobs), seed=seed)
    doc = corpus_to_coco(corpus)
    Path(out_path).write_text(json.dumps(doc, indent=2) + "\n")
    click.echo(f"wrote {out_path} ({n_images} image(s))")
    if render_dir is not None:
        target = Path(render_dir)
        target.mkdir(parents=True, exist_ok=True)
        for truth in corpus:
            name = target / f"img_{truth.image_id:04d}.png"
            scene_image(truth).save(name, format="PNG")
        click.echo(f"rendered {n_images} scene(s) into {target}")


@main.command()
@click.option("--project", "project_path", required=True, type=click.Path(exists=True))
@_backend_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@domain_errors
def serve(project_path, backend_descriptor, host, port):
    """Serve the labeling API for the web UI."""
    from .server import run_server

    run_server(project_path, backend_descriptor, host=host, port=port)


if __name__ == "__main__":
    main()
