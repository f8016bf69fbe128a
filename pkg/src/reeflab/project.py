"""Project container: imported images, label taxonomy, and mask instances.

A project round-trips to a single JSON document (schema in docs/formats.md);
images are referenced by relative path and masks embedded as RLE objects.
Edits follow a single-writer contract: callers serialize mutating calls,
readers may snapshot concurrently.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from PIL import Image, UnidentifiedImageError

from .errors import (
    CorruptProjectError,
    NotFoundError,
    UnsupportedVersionError,
    ValidationError,
)
from .masks import BinaryMask, mask_area

SCHEMA_VERSION = 1
SUPPORTED_FORMATS = {"PNG", "JPEG", "WEBP"}

_COLOR_RE = re.compile(r"^#[0-9A-Fa-f]{6}$")


class HealthStatus(str, Enum):
    HEALTHY = "Healthy"
    BLEACHED = "Bleached"
    DEAD = "Dead"
    UNSPECIFIED = "Unspecified"


class InstanceSource(str, Enum):
    AUTO = "auto"
    MANUAL = "manual"


@dataclass(frozen=True)
class Label:
    id: int
    name: str
    color: str

    def __post_init__(self):
        if self.id <= 0:
            raise ValidationError(f"label id must be positive, got {self.id}")
        if not self.name:
            raise ValidationError("label name must be non-empty")
        if not _COLOR_RE.match(self.color):
            raise ValidationError(f"label color {self.color!r} is not #RRGGBB")

    def rgb(self) -> tuple[int, int, int]:
        return tuple(int(self.color[i : i + 2], 16) for i in (1, 3, 5))  # type: ignore[return-value]


@dataclass
class LabeledInstance:
    instance_id: int
    mask: BinaryMask
    label_id: int | None
    health: HealthStatus
    confidence: float
    source: InstanceSource
    creation_index: int

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "mask": self.mask.to_json(),
            "label_id": self.label_id,
            "health": self.health.value,
            "confidence": self.confidence,
            "source": self.source.value,
            "creation_index": self.creation_index,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "LabeledInstance":
        return cls(
            instance_id=int(obj["instance_id"]),
            mask=BinaryMask.from_json(obj["mask"]),
            label_id=None if obj.get("label_id") is None else int(obj["label_id"]),
            health=HealthStatus(obj.get("health", "Unspecified")),
            confidence=float(obj.get("confidence", 1.0)),
            source=InstanceSource(obj.get("source", "manual")),
            creation_index=int(obj["creation_index"]),
        )


@dataclass
class ImageEntry:
    image_id: int
    path: str
    width: int
    height: int
    prepared: bool = False
    site: str | None = None

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "path": self.path,
            "width": self.width,
            "height": self.height,
            "prepared": self.prepared,
            "site": self.site,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ImageEntry":
        return cls(
            image_id=int(obj["image_id"]),
            path=str(obj["path"]),
            width=int(obj["width"]),
            height=int(obj["height"]),
            prepared=bool(obj.get("prepared", False)),
            site=obj.get("site"),
        )


@dataclass
class ProjectConfig:
    min_area_fraction: float = 0.01
    confidence_threshold: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.min_area_fraction < 1.0):
            raise ValidationError(
                f"min_area_fraction must be in [0, 1), got {self.min_area_fraction}"
            )
        if not (0.0 <= self.confidence_threshold <= 1.0):
            raise ValidationError(
                f"confidence_threshold must be in [0, 1], got {self.confidence_threshold}"
            )

    def to_dict(self) -> dict:
        return {
            "min_area_fraction": self.min_area_fraction,
            "confidence_threshold": self.confidence_threshold,
        }


@dataclass(frozen=True)
class ImportProblem:
    """One skipped file from a project import, with the reason."""

    path: str
    reason: str


class Project:
    """Versioned container of images, taxonomy, instances, and config."""

    def __init__(self, config: ProjectConfig | None = None):
        self.schema_version = SCHEMA_VERSION
        self.images: list[ImageEntry] = []
        self.labels: list[Label] = []
        self.instances: dict[int, list[LabeledInstance]] = {}
        self.config = config or ProjectConfig()
        # Monotone per-image counters; never reused within a session.
        self._next_instance_id: dict[int, int] = {}
        self._next_creation_index: dict[int, int] = {}

    # -- lookups ---------------------------------------------------------

    def image(self, image_id: int) -> ImageEntry:
        for entry in self.images:
            if entry.image_id == image_id:
                return entry
        raise NotFoundError(f"unknown image id {image_id}")

    def image_instances(self, image_id: int) -> list[LabeledInstance]:
        self.image(image_id)
        return self.instances.get(image_id, [])

    def label_by_id(self, label_id: int) -> Label:
        for label in self.labels:
            if label.id == label_id:
                return label
        raise NotFoundError(f"unknown label id {label_id}")

    def find_instance(self, image_id: int, instance_id: int) -> LabeledInstance:
        for inst in self.image_instances(image_id):
            if inst.instance_id == instance_id:
                return inst
        raise NotFoundError(f"image {image_id} has no instance {instance_id}")

    def total_instance_count(self) -> int:
        return sum(len(v) for v in self.instances.values())

    # -- edits -----------------------------------------------------------

    def add_image(self, path: str, width: int, height: int, site: str | None = None) -> int:
        if width <= 0 or height <= 0:
            raise ValidationError(f"image dimensions must be positive for {path!r}")
        if any(e.path == path for e in self.images):
            raise ValidationError(f"duplicate image path {path!r}")
        image_id = max((e.image_id for e in self.images), default=0) + 1
        self.images.append(
            ImageEntry(image_id=image_id, path=path, width=width, height=height, site=site)
        )
        self.instances.setdefault(image_id, [])
        self._next_instance_id[image_id] = 1
        self._next_creation_index[image_id] = 1
        return image_id

    def define_labels(self, labels: Sequence[Label]) -> None:
        """Replace the taxonomy; instances of dropped labels become unassigned."""
        ids = [l.id for l in labels]
        names = [l.name for l in labels]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate label ids")
        if len(set(names)) != len(names):
            raise ValidationError("duplicate label names")
        self.labels = list(labels)
        kept = set(ids)
        for insts in self.instances.values():
            for inst in insts:
                if inst.label_id is not None and inst.label_id not in kept:
                    inst.label_id = None

    def add_instance(
        self,
        image_id: int,
        mask: BinaryMask,
        source: InstanceSource = InstanceSource.MANUAL,
        confidence: float | None = None,
    ) -> int:
        entry = self.image(image_id)
        if (mask.width, mask.height) != (entry.width, entry.height):
            raise ValidationError(
                f"mask is {mask.width}x{mask.height}, image {image_id} is "
                f"{entry.width}x{entry.height}"
            )
        if mask_area(mask) < 1:
            raise ValidationError("empty masks cannot be inserted")
        conf = 1.0 if confidence is None else float(confidence)
        if not (0.0 <= conf <= 1.0):
            raise ValidationError(f"confidence must be in [0, 1], got {conf}")
        instance_id = self._next_instance_id[image_id]
        self._next_instance_id[image_id] += 1
        creation_index = self._next_creation_index[image_id]
        self._next_creation_index[image_id] += 1
        self.instances[image_id].append(
            LabeledInstance(
                instance_id=instance_id,
                mask=mask,
                label_id=None,
                health=HealthStatus.UNSPECIFIED,
                confidence=conf,
                source=InstanceSource(source),
                creation_index=creation_index,
            )
        )
        return instance_id

    def remove_instance(self, image_id: int, instance_id: int) -> None:
        inst = self.find_instance(image_id, instance_id)
        self.instances[image_id].remove(inst)

    def assign_label(self, image_id: int, instance_id: int, label_id: int | None) -> None:
        inst = self.find_instance(image_id, instance_id)
        if label_id is not None:
            self.label_by_id(label_id)
        inst.label_id = label_id

    def assign_health(self, image_id: int, instance_id: int, health: HealthStatus) -> None:
        inst = self.find_instance(image_id, instance_id)
        inst.health = HealthStatus(health)

    def mark_prepared(self, image_id: int, prepared: bool = True) -> None:
        self.image(image_id).prepared = prepared

    # -- integrity -------------------------------------------------------

    def validate(self) -> None:
        """Raise CorruptProjectError when referential integrity is broken."""
        issues: list[str] = []
        image_ids = [e.image_id for e in self.images]
        if len(set(image_ids)) != len(image_ids):
            issues.append("duplicate image ids")
        paths = [e.path for e in self.images]
        if len(set(paths)) != len(paths):
            issues.append("duplicate image paths")
        for entry in self.images:
            if entry.width <= 0 or entry.height <= 0:
                issues.append(f"image {entry.image_id} has non-positive dimensions")
        label_ids = {l.id for l in self.labels}
        if len(label_ids) != len(self.labels):
            issues.append("duplicate label ids")
        names = [l.name for l in self.labels]
        if len(set(names)) != len(names):
            issues.append("duplicate label names")
        known_images = set(image_ids)
        for image_id, insts in self.instances.items():
            if image_id not in known_images:
                issues.append(f"instances reference unknown image {image_id}")
                continue
            entry = self.image(image_id)
            seen_ids: set[int] = set()
            last_index = 0
            for inst in insts:
                if inst.instance_id in seen_ids:
                    issues.append(
                        f"image {image_id}: duplicate instance id {inst.instance_id}"
                    )
                seen_ids.add(inst.instance_id)
                if inst.creation_index <= last_index:
                    issues.append(
                        f"image {image_id}: creation indices not strictly increasing"
                    )
                last_index = inst.creation_index
                if (inst.mask.width, inst.mask.height) != (entry.width, entry.height):
                    issues.append(
                        f"image {image_id}: instance {inst.instance_id} mask size mismatch"
                    )
                if mask_area(inst.mask) < 1:
                    issues.append(
                        f"image {image_id}: instance {inst.instance_id} has an empty mask"
                    )
                if inst.label_id is not None and inst.label_id not in label_ids:
                    issues.append(
                        f"image {image_id}: instance {inst.instance_id} references "
                        f"missing label {inst.label_id}"
                    )
                if not (0.0 <= inst.confidence <= 1.0):
                    issues.append(
                        f"image {image_id}: instance {inst.instance_id} confidence out of range"
                    )
        if issues:
            raise CorruptProjectError(
                "project integrity violated: " + "; ".join(issues),
                details={"issues": issues},
            )

    # -- (de)serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "images": [e.to_dict() for e in self.images],
            "labels": [
                {"id": l.id, "name": l.name, "color": l.color} for l in self.labels
            ],
            "instances": {
                str(image_id): [inst.to_dict() for inst in insts]
                for image_id, insts in sorted(self.instances.items())
            },
            "config": self.config.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Project":
        version = obj.get("schema_version")
        if version != SCHEMA_VERSION:
            raise UnsupportedVersionError(
                f"unsupported project schema_version {version!r}, expected {SCHEMA_VERSION}"
            )
        try:
            config = ProjectConfig(**obj.get("config", {}))
            project = cls(config=config)
            project.images = [ImageEntry.from_dict(e) for e in obj.get("images", [])]
            project.labels = [
                Label(id=int(l["id"]), name=str(l["name"]), color=str(l["color"]))
                for l in obj.get("labels", [])
            ]
            project.instances = {
                int(image_id): [LabeledInstance.from_dict(i) for i in insts]
                for image_id, insts in obj.get("instances", {}).items()
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptProjectError(f"malformed project document: {exc}") from exc
        for entry in project.images:
            project.instances.setdefault(entry.image_id, [])
        for image_id, insts in project.instances.items():
            project._next_instance_id[image_id] = (
                max((i.instance_id for i in insts), default=0) + 1
            )
            project._next_creation_index[image_id] = (
                max((i.creation_index for i in insts), default=0) + 1
            )
        project.validate()
        return project

    def __eq__(self, other) -> bool:
        return isinstance(other, Project) and self.to_dict() == other.to_dict()


def sample_images(paths: Sequence[str | Path], stride: int) -> list[str]:
    """Every ``stride``-th path in sorted order, always keeping the first."""
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")
    ordered = sorted(str(p) for p in paths)
    return ordered[::stride]


def probe_image(path: str | Path) -> tuple[int, int]:
    """Return (width, height) of a readable PNG/JPEG/WEBP file."""
    try:
        with Image.open(path) as img:
            fmt = img.format
            width, height = img.size
    except FileNotFoundError:
        raise ValidationError(f"{path}: file not found")
    except UnidentifiedImageError:
        raise ValidationError(f"{path}: not a decodable image")
    except OSError as exc:
        raise ValidationError(f"{path}: {exc}")
    if fmt not in SUPPORTED_FORMATS:
        raise ValidationError(f"{path}: unsupported format {fmt!r}")
    if width <= 0 or height <= 0:
        raise ValidationError(f"{path}: non-positive dimensions")
    return width, height


def create_project(
    image_paths: Sequence[str | Path],
    config: ProjectConfig | None = None,
    base_dir: str | Path | None = None,
    site: str | None = None,
) -> tuple[Project, list[ImportProblem]]:
    """Build a project from image files, skipping and reporting unreadable ones.

    Paths are stored relative to ``base_dir`` (the future project-file
    directory) when given, otherwise as passed.  Raises when nothing imports.
    """
    if not image_paths:
        raise ValidationError("no images given")
    project = Project(config=config)
    problems: list[ImportProblem] = []
    for path in image_paths:
        try:
            width, height = probe_image(path)
        except ValidationError as exc:
            problems.append(ImportProblem(path=str(path), reason=str(exc)))
            continue
        stored = (
            os.path.relpath(path, base_dir) if base_dir is not None else str(path)
        )
        project.add_image(Path(stored).as_posix(), width, height, site=site)
    if not project.images:
        raise ValidationError(
            "no importable images",
            details={"problems": [p.reason for p in problems]},
        )
    return project, problems


def save_project(project: Project, path: str | Path) -> None:
    """Validate and atomically write the project JSON document."""
    project.validate()
    payload = json.dumps(project.to_dict(), indent=2) + "\n"
    target = Path(path)
    fd, tmp_name = tempfile.mkstemp(
        dir=str(target.parent) or ".", prefix=target.name, suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def load_project(path: str | Path) -> Project:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            obj = json.load(handle)
    except FileNotFoundError:
        raise NotFoundError(f"project file {path} not found")
    except json.JSONDecodeError as exc:
        raise CorruptProjectError(f"project file {path} is not valid JSON: {exc}")
    if not isinstance(obj, dict):
        raise CorruptProjectError(f"project file {path} must hold a JSON object")
    return Project.from_dict(obj)
