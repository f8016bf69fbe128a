"""Report figures rendered to PNG files alongside the delimited outputs.

Kept separate from the analytics engine: these functions only consume
finished reports/curves.  PNGs are written without the library's version
stamp so repeated runs produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analytics import StatsReport, bleaching_percentage, mortality_rate
from .evaluation import LocationResult, SimCurve
from .project import HealthStatus, Label

_PNG_METADATA = {"Software": None}

_HEALTH_COLORS = {
    HealthStatus.HEALTHY: "#2e8b57",
    HealthStatus.BLEACHED: "#f0ead6",
    HealthStatus.DEAD: "#55504a",
    HealthStatus.UNSPECIFIED: "#9e9e9e",
}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def save_coverage_figure(report: StatsReport, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 1.8))
    coverage = report.coverage
    ax.barh([0], [coverage], color="#2e8b57", label="coral")
    ax.barh([0], [1 - coverage], left=[coverage], color="#b8c4d0", label="other")
    ax.set_xlim(0, 1)
    ax.set_yticks([])
    ax.set_xlabel("fraction of pixels")
    ax.set_title(f"coral coverage {coverage:.1%} ({report.scope})")
    ax.legend(loc="lower right", ncol=2, fontsize=8)
    fig.tight_layout()
    return _save(fig, Path(path))


def save_label_distribution_figure(
    report: StatsReport, labels: Mapping[int, Label], path: str | Path
) -> Path:
    names, area_fractions, counts, colors = [], [], [], []
    for label_id, stats in report.per_label.items():
        label = labels.get(label_id)
        names.append(label.name if label else str(label_id))
        colors.append(label.color if label else "#808080")
        area_fractions.append(stats.fraction_of_coral)
        counts.append(stats.instance_count)
    if report.unassigned_instance_count:
        names.append("unassigned")
        colors.append("#808080")
        area_fractions.append(
            report.unassigned_pixels / report.coral_pixels if report.coral_pixels else 0.0
        )
        counts.append(report.unassigned_instance_count)
    fig, (ax_area, ax_count) = plt.subplots(1, 2, figsize=(9, 3.2))
    if names:
        ax_area.bar(names, area_fractions, color=colors)
        ax_count.bar(names, counts, color=colors)
        for ax in (ax_area, ax_count):
            ax.tick_params(axis="x", rotation=30)
    else:
        for ax in (ax_area, ax_count):
            ax.text(0.5, 0.5, "no labeled coral", ha="center", va="center")
            ax.set_xticks([])
    ax_area.set_ylabel("fraction of coral area")
    ax_count.set_ylabel("instance count")
    fig.suptitle(f"label distribution ({report.scope})")
    fig.tight_layout()
    return _save(fig, Path(path))


def save_health_figure(report: StatsReport, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    slices = [(status, stats) for status, stats in report.health.items() if stats.pixels > 0]
    if slices:
        ax.pie(
            [stats.pixels for _, stats in slices],
            labels=[status.value for status, _ in slices],
            colors=[_HEALTH_COLORS[status] for status, _ in slices],
            autopct="%1.1f%%",
        )
        ax.set_title(
            f"health ({report.scope}); bleaching {bleaching_percentage(report):.1%}, "
            f"mortality {mortality_rate(report):.1%}"
        )
    else:
        ax.text(0.5, 0.5, "no coral pixels", ha="center", va="center")
        ax.set_xticks([])
        ax.set_yticks([])
        ax.set_title(f"health ({report.scope})")
    fig.tight_layout()
    return _save(fig, Path(path))


def save_stats_figures(
    report: StatsReport, labels: Mapping[int, Label], out_dir: str | Path
) -> list[Path]:
    out = Path(out_dir)
    return [
        save_coverage_figure(report, out / "coverage.png"),
        save_label_distribution_figure(report, labels, out / "label_distribution.png"),
        save_health_figure(report, out / "health_summary.png"),
    ]


def save_curve_figure(
    curves: SimCurve | Sequence[SimCurve], path: str | Path, title: str | None = None
) -> Path:
    if isinstance(curves, SimCurve):
        curves = [curves]
    fig, ax = plt.subplots(figsize=(6, 4))
    for curve in curves:
        efforts = [e for e, _ in curve.points]
        accuracies = [a for _, a in curve.points]
        ax.plot(efforts, accuracies, label=f"{curve.method} (seed {curve.seed})")
    ax.set_xlabel("annotation effort")
    ax.set_ylabel("pixel accuracy")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, Path(path))


def save_locations_figure(results: Sequence[LocationResult], path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(results)), 4))
    names = [r.location for r in results]
    means = [r.mean for r in results]
    ax.bar(names, means, color="#4363d8")
    for i, mean in enumerate(means):
        ax.text(i, mean, f"{mean:.4f}", ha="center", va="bottom", fontsize=8)
    ax.set_ylabel("mean pixel accuracy")
    ax.set_ylim(0, 1.05)
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    return _save(fig, Path(path))
