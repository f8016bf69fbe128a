"""COCO JSON export/import with strict validation.

Exports use uncompressed RLE segmentations with ``iscrowd`` 0 so every
instance stays individually addressable.  Health, source, and confidence
travel in an ``attributes`` extension object and label colors in a ``color``
key on categories; importers unaware of either can ignore them safely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import ValidationError
from ..masks import BinaryMask, mask_area, mask_bbox
from ..project import (
    HealthStatus,
    InstanceSource,
    Label,
    Project,
    ProjectConfig,
)

UNASSIGNED_CATEGORY = "coral_unassigned"
SUPERCATEGORY = "coral"

_FALLBACK_COLORS = (
    "#E6194B", "#3CB44B", "#FFE119", "#4363D8", "#F58231", "#911EB4",
    "#46F0F0", "#F032E6", "#BCF60C", "#FABEBE", "#008080", "#E6BEFF",
)


def _fallback_color(index: int) -> str:
    return _FALLBACK_COLORS[index % len(_FALLBACK_COLORS)]


@dataclass(frozen=True)
class CocoImageInfo:
    id: int
    file_name: str
    width: int
    height: int


@dataclass(frozen=True)
class CocoCategoryInfo:
    id: int
    name: str
    supercategory: str
    color: str | None = None


@dataclass(frozen=True)
class CocoInstance:
    annotation_id: int
    image_id: int
    category_id: int
    mask: BinaryMask
    health: HealthStatus
    source: InstanceSource
    confidence: float


@dataclass(frozen=True)
class ImportedCoco:
    images: tuple[CocoImageInfo, ...]
    categories: tuple[CocoCategoryInfo, ...]
    instances: tuple[CocoInstance, ...]

    def instances_for(self, image_id: int) -> list[CocoInstance]:
        return [inst for inst in self.instances if inst.image_id == image_id]

    @property
    def unassigned_category_id(self) -> int | None:
        for category in self.categories:
            if category.name == UNASSIGNED_CATEGORY:
                return category.id
        return None


def export_coco(project: Project) -> dict:
    """Render a project as a COCO document (plain JSON-ready dict)."""
    project.validate()
    images = [
        {
            "id": entry.image_id,
            "file_name": entry.path,
            "width": entry.width,
            "height": entry.height,
        }
        for entry in sorted(project.images, key=lambda e: e.image_id)
    ]
    unassigned_id = max((l.id for l in project.labels), default=0) + 1
    categories = [
        {
            "id": label.id,
            "name": label.name,
            "supercategory": SUPERCATEGORY,
            "color": label.color,
        }
        for label in sorted(project.labels, key=lambda l: l.id)
    ]
    if any(
        inst.label_id is None
        for insts in project.instances.values()
        for inst in insts
    ):
        categories.append(
            {
                "id": unassigned_id,
                "name": UNASSIGNED_CATEGORY,
                "supercategory": SUPERCATEGORY,
                "color": "#808080",
            }
        )
    annotations = []
    next_id = 1
    for entry in sorted(project.images, key=lambda e: e.image_id):
        instances = sorted(
            project.image_instances(entry.image_id), key=lambda i: i.instance_id
        )
        for inst in instances:
            box = mask_bbox(inst.mask)
            annotations.append(
                {
                    "id": next_id,
                    "image_id": entry.image_id,
                    "category_id": inst.label_id if inst.label_id is not None else unassigned_id,
                    "segmentation": inst.mask.to_json(),
                    "area": mask_area(inst.mask),
                    "bbox": box.to_list() if box else [0, 0, 0, 0],
                    "iscrowd": 0,
                    "attributes": {
                        "health": inst.health.value,
                        "source": inst.source.value,
                        "confidence": inst.confidence,
                    },
                }
            )
            next_id += 1
    return {"images": images, "annotations": annotations, "categories": categories}


def export_coco_bytes(project: Project) -> bytes:
    """Byte-deterministic serialization shared by the CLI and the HTTP export."""
    return (json.dumps(export_coco(project), indent=2) + "\n").encode("utf-8")


def _issue(issues: list[dict], reason: str, detail: str, annotation_id: int | None = None):
    entry: dict = {"reason": reason, "detail": detail}
    if annotation_id is not None:
        entry["annotation_id"] = annotation_id
    issues.append(entry)


def import_coco(source: str | Path | dict) -> ImportedCoco:
    """Parse and validate a COCO document.

    Raises :class:`ValidationError` whose ``details["issues"]`` lists every
    problem found, each with a machine-readable ``reason`` and the offending
    annotation id where applicable.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ValidationError("COCO document must be a JSON object")

    issues: list[dict] = []
    images: list[CocoImageInfo] = []
    seen_image_ids: set[int] = set()
    for item in doc.get("images", []):
        try:
            info = CocoImageInfo(
                id=int(item["id"]),
                file_name=str(item["file_name"]),
                width=int(item["width"]),
                height=int(item["height"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            _issue(issues, "bad_image", f"malformed image entry: {exc}")
            continue
        if info.width <= 0 or info.height <= 0:
            _issue(issues, "bad_image", f"image {info.id} has non-positive dimensions")
        if info.id in seen_image_ids:
            _issue(issues, "duplicate_image_id", f"image id {info.id} repeated")
        seen_image_ids.add(info.id)
        images.append(info)

    categories: list[CocoCategoryInfo] = []
    seen_category_ids: set[int] = set()
    for item in doc.get("categories", []):
        try:
            info = CocoCategoryInfo(
                id=int(item["id"]),
                name=str(item["name"]),
                supercategory=str(item.get("supercategory", SUPERCATEGORY)),
                color=item.get("color"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            _issue(issues, "bad_category", f"malformed category entry: {exc}")
            continue
        if info.id in seen_category_ids:
            _issue(issues, "duplicate_category_id", f"category id {info.id} repeated")
        seen_category_ids.add(info.id)
        categories.append(info)

    image_sizes = {info.id: (info.width, info.height) for info in images}
    instances: list[CocoInstance] = []
    seen_annotation_ids: set[int] = set()
    for item in doc.get("annotations", []):
        try:
            annotation_id = int(item["id"])
        except (KeyError, TypeError, ValueError):
            _issue(issues, "bad_annotation", "annotation without a usable id")
            continue
        if annotation_id in seen_annotation_ids:
            _issue(issues, "duplicate_annotation_id", f"annotation id {annotation_id} repeated",
                   annotation_id)
        seen_annotation_ids.add(annotation_id)
        try:
            image_id = int(item["image_id"])
            category_id = int(item["category_id"])
        except (KeyError, TypeError, ValueError) as exc:
            _issue(issues, "bad_annotation", f"malformed annotation: {exc}", annotation_id)
            continue
        if image_id not in seen_image_ids:
            _issue(issues, "dangling_image", f"annotation {annotation_id} references "
                   f"missing image {image_id}", annotation_id)
            continue
        if category_id not in seen_category_ids:
            _issue(issues, "dangling_category", f"annotation {annotation_id} references "
                   f"missing category {category_id}", annotation_id)
            continue
        try:
            mask = BinaryMask.from_json(item["segmentation"])
        except (KeyError, ValidationError) as exc:
            _issue(issues, "bad_rle", f"annotation {annotation_id}: {exc}", annotation_id)
            continue
        width, height = image_sizes[image_id]
        if (mask.width, mask.height) != (width, height):
            _issue(issues, "size_mismatch", f"annotation {annotation_id} mask is "
                   f"{mask.width}x{mask.height}, image is {width}x{height}", annotation_id)
            continue
        area = mask_area(mask)
        if int(item.get("area", -1)) != area:
            _issue(issues, "area_mismatch", f"annotation {annotation_id} states area "
                   f"{item.get('area')}, counts encode {area}", annotation_id)
        box = mask_bbox(mask)
        expected_bbox = box.to_list() if box else [0, 0, 0, 0]
        if [int(v) for v in item.get("bbox", [])] != expected_bbox:
            _issue(issues, "bbox_mismatch", f"annotation {annotation_id} states bbox "
                   f"{item.get('bbox')}, counts encode {expected_bbox}", annotation_id)
        attributes = item.get("attributes", {}) or {}
        try:
            health = HealthStatus(attributes.get("health", "Unspecified"))
            source = InstanceSource(attributes.get("source", "manual"))
            confidence = float(attributes.get("confidence", 1.0))
        except ValueError as exc:
            _issue(issues, "bad_attributes", f"annotation {annotation_id}: {exc}", annotation_id)
            continue
        instances.append(
            CocoInstance(
                annotation_id=annotation_id,
                image_id=image_id,
                category_id=category_id,
                mask=mask,
                health=health,
                source=source,
                confidence=confidence,
            )
        )

    if issues:
        offending = sorted(
            {i["annotation_id"] for i in issues if "annotation_id" in i}
        )
        raise ValidationError(
            f"COCO document failed validation ({len(issues)} issue(s); "
            f"annotations {offending})",
            details={"issues": issues},
        )
    return ImportedCoco(
        images=tuple(images), categories=tuple(categories), instances=tuple(instances)
    )


def to_project(imported: ImportedCoco, config: ProjectConfig | None = None) -> Project:
    """Rebuild a project from an imported document.

    Instance ids are renumbered sequentially per image in annotation order;
    masks, labels, and health are preserved exactly.
    """
    project = Project(config=config)
    for info in sorted(imported.images, key=lambda i: i.id):
        project.add_image(info.file_name, info.width, info.height)
    labels = [
        Label(
            id=category.id,
            name=category.name,
            color=category.color or _fallback_color(i),
        )
        for i, category in enumerate(imported.categories)
        if category.name != UNASSIGNED_CATEGORY
    ]
    project.define_labels(labels)
    id_map = {
        old.id: new.image_id
        for old, new in zip(
            sorted(imported.images, key=lambda i: i.id),
            sorted(project.images, key=lambda e: e.image_id),
        )
    }
    unassigned_id = imported.unassigned_category_id
    for inst in imported.instances:
        image_id = id_map[inst.image_id]
        new_id = project.add_instance(
            image_id, inst.mask, source=inst.source, confidence=inst.confidence
        )
        if unassigned_id is None or inst.category_id != unassigned_id:
            project.assign_label(image_id, new_id, inst.category_id)
        project.assign_health(image_id, new_id, inst.health)
    return project
