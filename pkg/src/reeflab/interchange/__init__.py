"""Data interchange: COCO JSON, CSV projections, and overlay rendering."""

from __future__ import annotations

from .coco import (
    UNASSIGNED_CATEGORY,
    CocoCategoryInfo,
    CocoImageInfo,
    CocoInstance,
    ImportedCoco,
    export_coco,
    export_coco_bytes,
    import_coco,
    to_project,
)
from .csvio import (
    CURVE_HEADER,
    INSTANCES_HEADER,
    LOCATIONS_HEADER,
    STATS_HEADER,
    curve_csv,
    instances_csv,
    locations_csv,
    report_csv,
    stats_csv,
)
from .overlay import UNASSIGNED_COLOR, render_overlay

__all__ = [
    "UNASSIGNED_CATEGORY",
    "UNASSIGNED_COLOR",
    "CocoCategoryInfo",
    "CocoImageInfo",
    "CocoInstance",
    "ImportedCoco",
    "CURVE_HEADER",
    "INSTANCES_HEADER",
    "LOCATIONS_HEADER",
    "STATS_HEADER",
    "curve_csv",
    "export_coco",
    "export_coco_bytes",
    "import_coco",
    "instances_csv",
    "locations_csv",
    "render_overlay",
    "report_csv",
    "stats_csv",
    "to_project",
]
