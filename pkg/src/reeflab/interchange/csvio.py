"""CSV projections: instance tables, statistics tables, simulation curves,
and per-location aggregates.

All writers emit UTF-8 bytes with LF line endings and RFC-4180 quoting, and
are byte-deterministic given their inputs.
"""

from __future__ import annotations

import csv
import io
from typing import Sequence

from ..analytics import StatsReport, bleaching_percentage, image_stats, mortality_rate, project_stats
from ..evaluation import LocationResult, SimCurve
from ..masks import mask_area, mask_bbox
from ..project import Project

INSTANCES_HEADER = [
    "image",
    "instance_id",
    "label_id",
    "label_name",
    "health",
    "area_px",
    "area_fraction",
    "bbox_x",
    "bbox_y",
    "bbox_w",
    "bbox_h",
]

STATS_HEADER = [
    "scope",
    "section",
    "key",
    "pixels",
    "coverage_of_image",
    "fraction_of_coral",
    "instance_count",
]

CURVE_HEADER = ["method", "seed", "effort", "accuracy"]

LOCATIONS_HEADER = ["location", "n_images", "mean_accuracy"]


def _writer() -> tuple[io.StringIO, "csv.writer"]:
    buffer = io.StringIO()
    return buffer, csv.writer(buffer, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)


def instances_csv(project: Project) -> bytes:
    """One row per instance, ordered by (image_id, instance_id)."""
    names = {label.id: label.name for label in project.labels}
    buffer, writer = _writer()
    writer.writerow(INSTANCES_HEADER)
    for entry in sorted(project.images, key=lambda e: e.image_id):
        total = entry.width * entry.height
        for inst in sorted(project.image_instances(entry.image_id), key=lambda i: i.instance_id):
            area = mask_area(inst.mask)
            box = mask_bbox(inst.mask)
            writer.writerow(
                [
                    entry.path,
                    inst.instance_id,
                    "" if inst.label_id is None else inst.label_id,
                    names.get(inst.label_id, ""),
                    inst.health.value,
                    area,
                    area / total,
                    box.x if box else "",
                    box.y if box else "",
                    box.w if box else "",
                    box.h if box else "",
                ]
            )
    return buffer.getvalue().encode("utf-8")


def _report_rows(writer, report: StatsReport, names: dict[int, str]) -> None:
    total_instances = report.unassigned_instance_count + sum(
        s.instance_count for s in report.per_label.values()
    )
    writer.writerow([report.scope, "summary", "total_pixels", report.total_pixels, "", "", ""])
    writer.writerow(
        [report.scope, "summary", "coral_pixels", report.coral_pixels, report.coverage, "",
         total_instances]
    )
    writer.writerow(
        [report.scope, "summary", "bleaching_percentage", "", "", bleaching_percentage(report), ""]
    )
    writer.writerow(
        [report.scope, "summary", "mortality_rate", "", "", mortality_rate(report), ""]
    )
    for label_id, stats in report.per_label.items():
        writer.writerow(
            [
                report.scope,
                "label",
                names.get(label_id, str(label_id)),
                stats.pixels,
                stats.coverage_of_image,
                stats.fraction_of_coral,
                stats.instance_count,
            ]
        )
    if report.unassigned_instance_count or report.unassigned_pixels:
        writer.writerow(
            [
                report.scope,
                "unassigned",
                "",
                report.unassigned_pixels,
                report.unassigned_pixels / report.total_pixels,
                (report.unassigned_pixels / report.coral_pixels) if report.coral_pixels else 0.0,
                report.unassigned_instance_count,
            ]
        )
    for status, stats in report.health.items():
        writer.writerow(
            [
                report.scope,
                "health",
                status.value,
                stats.pixels,
                "",
                stats.fraction_of_coral,
                stats.instance_count,
            ]
        )


def stats_csv(project: Project) -> bytes:
    """Project-level rows first, then per-image blocks in image-id order."""
    names = {label.id: label.name for label in project.labels}
    buffer, writer = _writer()
    writer.writerow(STATS_HEADER)
    _report_rows(writer, project_stats(project), names)
    for entry in sorted(project.images, key=lambda e: e.image_id):
        _report_rows(writer, image_stats(project, entry.image_id), names)
    return buffer.getvalue().encode("utf-8")


def report_csv(report: StatsReport, names: dict[int, str] | None = None) -> bytes:
    buffer, writer = _writer()
    writer.writerow(STATS_HEADER)
    _report_rows(writer, report, names or {})
    return buffer.getvalue().encode("utf-8")


def curve_csv(curve: SimCurve) -> bytes:
    buffer, writer = _writer()
    writer.writerow(CURVE_HEADER)
    for effort, accuracy in curve.points:
        writer.writerow([curve.method, curve.seed, effort, accuracy])
    return buffer.getvalue().encode("utf-8")


def locations_csv(results: Sequence[LocationResult]) -> bytes:
    """Per-location means rendered to 4 decimals."""
    buffer, writer = _writer()
    writer.writerow(LOCATIONS_HEADER)
    for result in results:
        writer.writerow([result.location, len(result.accuracies), f"{result.mean:.4f}"])
    return buffer.getvalue().encode("utf-8")
