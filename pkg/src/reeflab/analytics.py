"""Coverage, label-distribution, and health statistics over projects.

All figures derive from one flattening pass per image: instances are painted
in creation order (newest wins overlaps), then visible pixels are bucketed by
owning instance.  Counts are exact integers; ratios are double precision and
never rounded here — rendering rounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ValidationError
from .masks import UNASSIGNED_VALUE, flatten_to_semantic
from .project import HealthStatus, LabeledInstance, Project

PROJECT_SCOPE = "project"


def image_scope(image_id: int) -> str:
    return f"image:{image_id}"


@dataclass(frozen=True)
class LabelBreakdown:
    pixels: int
    coverage_of_image: float
    fraction_of_coral: float
    instance_count: int


@dataclass(frozen=True)
class HealthBreakdown:
    pixels: int
    fraction_of_coral: float
    instance_count: int


@dataclass(frozen=True)
class StatsReport:
    scope: str
    total_pixels: int
    coral_pixels: int
    coverage: float
    per_label: dict[int, LabelBreakdown]
    health: dict[HealthStatus, HealthBreakdown]
    unassigned_pixels: int
    unassigned_instance_count: int

    def to_dict(self) -> dict:
        return {
            "scope": self.scope,
            "total_pixels": self.total_pixels,
            "coral_pixels": self.coral_pixels,
            "coverage": self.coverage,
            "per_label": {
                str(label_id): vars(stats) for label_id, stats in self.per_label.items()
            },
            "health": {status.value: vars(stats) for status, stats in self.health.items()},
            "unassigned_pixels": self.unassigned_pixels,
            "unassigned_instance_count": self.unassigned_instance_count,
        }


def semantic_raster(project: Project, image_id: int) -> np.ndarray:
    """Label-id raster for one image; unlabeled instances paint UNASSIGNED_VALUE."""
    entry = project.image(image_id)
    layers = [
        (inst.mask, inst.label_id if inst.label_id is not None else UNASSIGNED_VALUE)
        for inst in project.image_instances(image_id)
    ]
    return flatten_to_semantic(layers, entry.width, entry.height)


def _visible_pixels(project: Project, image_id: int) -> tuple[list[LabeledInstance], np.ndarray]:
    """Per-instance visible pixel counts after overlap resolution."""
    entry = project.image(image_id)
    instances = project.image_instances(image_id)
    owner = flatten_to_semantic(
        [(inst.mask, i + 1) for i, inst in enumerate(instances)],
        entry.width,
        entry.height,
    )
    counts = np.bincount(owner.ravel(), minlength=len(instances) + 1)
    return instances, counts[1:]


def _fraction(part: int, whole: int) -> float:
    return part / whole if whole > 0 else 0.0


def image_stats(project: Project, image_id: int) -> StatsReport:
    entry = project.image(image_id)
    instances, visible = _visible_pixels(project, image_id)
    total = entry.width * entry.height
    coral = int(visible.sum())

    label_pixels: dict[int, int] = {}
    label_instances: dict[int, int] = {}
    health_pixels: dict[HealthStatus, int] = {}
    health_instances: dict[HealthStatus, int] = {}
    unassigned_pixels = 0
    unassigned_instances = 0
    for inst, pixels in zip(instances, (int(v) for v in visible)):
        if inst.label_id is None:
            unassigned_pixels += pixels
            unassigned_instances += 1
        else:
            label_pixels[inst.label_id] = label_pixels.get(inst.label_id, 0) + pixels
            label_instances[inst.label_id] = label_instances.get(inst.label_id, 0) + 1
        health_pixels[inst.health] = health_pixels.get(inst.health, 0) + pixels
        health_instances[inst.health] = health_instances.get(inst.health, 0) + 1

    per_label = {
        label_id: LabelBreakdown(
            pixels=label_pixels[label_id],
            coverage_of_image=_fraction(label_pixels[label_id], total),
            fraction_of_coral=_fraction(label_pixels[label_id], coral),
            instance_count=label_instances[label_id],
        )
        for label_id in sorted(label_pixels)
    }
    health = {
        status: HealthBreakdown(
            pixels=health_pixels[status],
            fraction_of_coral=_fraction(health_pixels[status], coral),
            instance_count=health_instances[status],
        )
        for status in HealthStatus
        if status in health_pixels
    }
    return StatsReport(
        scope=image_scope(image_id),
        total_pixels=total,
        coral_pixels=coral,
        coverage=_fraction(coral, total),
        per_label=per_label,
        health=health,
        unassigned_pixels=unassigned_pixels,
        unassigned_instance_count=unassigned_instances,
    )


def project_stats(project: Project) -> StatsReport:
    """Pixel-weighted aggregate over all images: sum counts, then ratio."""
    if not project.images:
        raise ValidationError("project has no images")
    total = 0
    coral = 0
    label_pixels: dict[int, int] = {}
    label_instances: dict[int, int] = {}
    health_pixels: dict[HealthStatus, int] = {}
    health_instances: dict[HealthStatus, int] = {}
    unassigned_pixels = 0
    unassigned_instances = 0
    for entry in project.images:
        report = image_stats(project, entry.image_id)
        total += report.total_pixels
        coral += report.coral_pixels
        unassigned_pixels += report.unassigned_pixels
        unassigned_instances += report.unassigned_instance_count
        for label_id, stats in report.per_label.items():
            label_pixels[label_id] = label_pixels.get(label_id, 0) + stats.pixels
            label_instances[label_id] = (
                label_instances.get(label_id, 0) + stats.instance_count
            )
        for status, stats in report.health.items():
            health_pixels[status] = health_pixels.get(status, 0) + stats.pixels
            health_instances[status] = (
                health_instances.get(status, 0) + stats.instance_count
            )
    per_label = {
        label_id: LabelBreakdown(
            pixels=label_pixels[label_id],
            coverage_of_image=_fraction(label_pixels[label_id], total),
            fraction_of_coral=_fraction(label_pixels[label_id], coral),
            instance_count=label_instances[label_id],
        )
        for label_id in sorted(label_pixels)
    }
    health = {
        status: HealthBreakdown(
            pixels=health_pixels[status],
            fraction_of_coral=_fraction(health_pixels[status], coral),
            instance_count=health_instances[status],
        )
        for status in HealthStatus
        if status in health_pixels
    }
    return StatsReport(
        scope=PROJECT_SCOPE,
        total_pixels=total,
        coral_pixels=coral,
        coverage=_fraction(coral, total),
        per_label=per_label,
        health=health,
        unassigned_pixels=unassigned_pixels,
        unassigned_instance_count=unassigned_instances,
    )


def bleaching_percentage(report: StatsReport) -> float:
    """Bleached coral pixels over all coral pixels; 0 when there is no coral."""
    stats = report.health.get(HealthStatus.BLEACHED)
    return _fraction(stats.pixels if stats else 0, report.coral_pixels)


def mortality_rate(report: StatsReport) -> float:
    """Dead coral pixels over all coral pixels; 0 when there is no coral."""
    stats = report.health.get(HealthStatus.DEAD)
    return _fraction(stats.pixels if stats else 0, report.coral_pixels)
