"""Deterministic test backend that answers from ground-truth masks.

With ``erosion_radius == 0`` it models a perfect segmenter; a positive
radius shrinks every answer by a Euclidean disk, leaving a boundary error
band for refinement loops to work on.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from ..errors import NotFoundError, ValidationError
from ..gt import GroundTruth, load_ground_truth
from ..masks import BinaryMask, mask_area, rle_decode, rle_encode
from .base import (
    BackendDescriptor,
    MaskProposal,
    PointPrompt,
    SegmentationBackend,
    filter_proposals,
    validate_prompts,
)


def disk_structure(radius: int) -> np.ndarray:
    """Boolean disk: offsets with dx^2 + dy^2 <= radius^2."""
    yy, xx = np.mgrid[-radius : radius + 1, -radius : radius + 1]
    return (xx * xx + yy * yy) <= radius * radius


def erode_mask(mask: BinaryMask, radius: int) -> BinaryMask:
    """Morphological erosion by a Euclidean disk; outside the image counts as background."""
    if radius < 0:
        raise ValidationError(f"erosion radius must be >= 0, got {radius}")
    if radius == 0:
        return mask
    raster = rle_decode(mask)
    eroded = ndimage.binary_erosion(raster, structure=disk_structure(radius), border_value=0)
    return rle_encode(eroded)


class OracleBackend(SegmentationBackend):
    """Answers prepare/auto/prompt from per-image :class:`GroundTruth`.

    Negative prompts are accepted but ignored: the answer is keyed on the
    first positive point.  A positive point on background yields the empty
    mask with confidence 0.  Deterministic and stateless across calls.
    """

    def __init__(self, ground_truth: Mapping[int, GroundTruth], erosion_radius: int = 0):
        if erosion_radius < 0:
            raise ValidationError(f"erosion radius must be >= 0, got {erosion_radius}")
        self._gt = dict(ground_truth)
        self._erosion = int(erosion_radius)
        self._prepared: set[int] = set()
        self._eroded: dict[int, list[BinaryMask]] = {}

    @classmethod
    def from_source(cls, path: str | Path, erosion_radius: int = 0) -> "OracleBackend":
        return cls(load_ground_truth(path), erosion_radius=erosion_radius)

    @classmethod
    def from_descriptor(cls, descriptor: BackendDescriptor) -> "OracleBackend":
        assert descriptor.kind == "oracle"
        return cls.from_source(descriptor.gt_path, erosion_radius=descriptor.erosion_radius)

    @property
    def erosion_radius(self) -> int:
        return self._erosion

    def ground_truth(self, image_id: int) -> GroundTruth:
        try:
            return self._gt[image_id]
        except KeyError:
            raise NotFoundError(f"no ground truth for image {image_id}")

    def prepare(self, image_id: int, image_path: str | Path | None = None) -> None:
        self.ground_truth(image_id)
        self._prepared.add(image_id)

    def is_prepared(self, image_id: int) -> bool:
        return image_id in self._prepared

    def _require_prepared(self, image_id: int) -> GroundTruth:
        gt = self.ground_truth(image_id)
        if image_id not in self._prepared:
            raise ValidationError(f"image {image_id} is not prepared")
        return gt

    def _eroded_masks(self, image_id: int) -> list[BinaryMask]:
        if image_id not in self._eroded:
            gt = self.ground_truth(image_id)
            self._eroded[image_id] = [erode_mask(m, self._erosion) for m in gt.masks]
        return self._eroded[image_id]

    def auto_segment(
        self, image_id: int, min_area_fraction: float, confidence_threshold: float
    ) -> list[MaskProposal]:
        gt = self._require_prepared(image_id)
        proposals = [MaskProposal(mask=m, confidence=1.0) for m in self._eroded_masks(image_id)]
        return filter_proposals(
            proposals, gt.width, gt.height, min_area_fraction, confidence_threshold
        )

    def prompt(self, image_id: int, prompts: Sequence[PointPrompt]) -> MaskProposal:
        gt = self._require_prepared(image_id)
        validate_prompts(prompts, gt.width, gt.height, require_positive=True)
        point = next(p for p in prompts if p.is_positive)
        for original, eroded in zip(gt.masks, self._eroded_masks(image_id)):
            if rle_decode(original)[point.y, point.x]:
                return MaskProposal(mask=eroded, confidence=1.0)
        return MaskProposal(mask=BinaryMask.empty(gt.width, gt.height), confidence=0.0)
