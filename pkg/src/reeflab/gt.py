"""Ground-truth instance masks for the oracle backend and the simulators.

Two source layouts are understood: a COCO JSON document (annotations grouped
per image) or grayscale PNGs where each nonzero pixel value is one instance
id (a directory of ``<image_id>.png`` files, or a single file).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ValidationError
from .masks import BinaryMask, rle_decode, rle_encode


@dataclass(frozen=True)
class GroundTruth:
    """Instance-separated coral masks for one image.

    Instances need not be disjoint; their binary union defines "coral".
    """

    image_id: int
    width: int
    height: int
    masks: tuple[BinaryMask, ...]

    def __post_init__(self):
        for m in self.masks:
            if (m.width, m.height) != (self.width, self.height):
                raise ValidationError(
                    f"ground truth for image {self.image_id}: mask "
                    f"{m.width}x{m.height} does not match {self.width}x{self.height}"
                )

    @cached_property
    def union(self) -> np.ndarray:
        out = np.zeros((self.height, self.width), dtype=bool)
        for m in self.masks:
            out |= rle_decode(m)
        return out

    @property
    def total_pixels(self) -> int:
        return self.width * self.height

    @property
    def coral_pixel_count(self) -> int:
        return int(self.union.sum())


def ground_truth_from_png(path: str | Path, image_id: int) -> GroundTruth:
    try:
        with Image.open(path) as img:
            arr = np.array(img)
    except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
        raise ValidationError(f"{path}: cannot read ground-truth raster: {exc}")
    if arr.ndim != 2:
        raise ValidationError(f"{path}: instance-id rasters must be single-channel")
    values = sorted(int(v) for v in np.unique(arr) if v != 0)
    masks = tuple(rle_encode(arr == v) for v in values)
    height, width = arr.shape
    return GroundTruth(image_id=image_id, width=width, height=height, masks=masks)


def ground_truth_from_coco(imported) -> dict[int, GroundTruth]:
    """Group an imported COCO document's masks per image, all categories."""
    out: dict[int, GroundTruth] = {}
    for info in imported.images:
        masks = tuple(inst.mask for inst in imported.instances_for(info.id))
        out[info.id] = GroundTruth(
            image_id=info.id, width=info.width, height=info.height, masks=masks
        )
    return out


def load_ground_truth(path: str | Path) -> dict[int, GroundTruth]:
    """Load a ground-truth source: COCO JSON, a PNG directory, or one PNG."""
    p = Path(path)
    if p.is_dir():
        out: dict[int, GroundTruth] = {}
        for child in sorted(p.glob("*.png")):
            try:
                image_id = int(child.stem)
            except ValueError:
                raise ValidationError(
                    f"{child}: ground-truth PNGs in a directory must be named <image_id>.png"
                )
            out[image_id] = ground_truth_from_png(child, image_id)
        if not out:
            raise ValidationError(f"{p}: no ground-truth PNGs found")
        return out
    if p.suffix.lower() == ".json":
        from .interchange.coco import import_coco

        return ground_truth_from_coco(import_coco(p))
    if p.suffix.lower() == ".png":
        try:
            image_id = int(p.stem)
        except ValueError:
            image_id = 1
        return {image_id: ground_truth_from_png(p, image_id)}
    raise ValidationError(f"{p}: unsupported ground-truth source (want .json, .png, or a directory)")
