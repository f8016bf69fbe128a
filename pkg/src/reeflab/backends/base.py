"""Pluggable segmentation-backend protocol.

A backend prepares each image once, proposes masks for whole images, and
turns point prompts into masks.  Calls for distinct images may run
concurrently; calls for one image are serialized by the caller.
"""

from __future__ import annotations

import math
import shlex
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from ..errors import ValidationError
from ..masks import BinaryMask, mask_area


class Polarity(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class PointPrompt:
    """A pixel coordinate guiding segmentation; positive = inside the target."""

    x: int
    y: int
    polarity: Polarity = Polarity.POSITIVE

    @property
    def is_positive(self) -> bool:
        return self.polarity == Polarity.POSITIVE

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "polarity": self.polarity.value}

    @classmethod
    def from_dict(cls, obj: dict) -> "PointPrompt":
        return cls(
            x=int(obj["x"]), y=int(obj["y"]), polarity=Polarity(obj.get("polarity", "positive"))
        )


@dataclass(frozen=True)
class MaskProposal:
    mask: BinaryMask
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValidationError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class BackendDescriptor:
    """Configuration for exactly one backend kind.

    Text form: ``oracle:<gt-path>[,erosion=<px>]`` or ``subprocess:<command>``.
    """

    kind: str
    gt_path: str | None = None
    erosion_radius: int = 0
    command: str | None = None

    def __post_init__(self):
        if self.kind == "oracle":
            if not self.gt_path or self.command is not None:
                raise ValidationError("oracle descriptor needs gt_path and no command")
            if self.erosion_radius < 0:
                raise ValidationError("erosion_radius must be >= 0")
        elif self.kind == "subprocess":
            if not self.command or self.gt_path is not None:
                raise ValidationError("subprocess descriptor needs a command and no gt_path")
        else:
            raise ValidationError(f"unknown backend kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "BackendDescriptor":
        kind, sep, rest = text.partition(":")
        if not sep or not rest:
            raise ValidationError(
                f"bad backend descriptor {text!r}; want oracle:<gt-path>[,erosion=N] "
                "or subprocess:<command>"
            )
        if kind == "oracle":
            gt_path, erosion = rest, 0
            if ",erosion=" in rest:
                gt_path, _, value = rest.rpartition(",erosion=")
                try:
                    erosion = int(value)
                except ValueError:
                    raise ValidationError(f"bad erosion radius {value!r}")
            return cls(kind="oracle", gt_path=gt_path, erosion_radius=erosion)
        if kind == "subprocess":
            return cls(kind="subprocess", command=rest)
        raise ValidationError(f"unknown backend kind {kind!r}")


class SegmentationBackend(ABC):
    """Interface every mask backend implements."""

    @abstractmethod
    def prepare(self, image_id: int, image_path: str | Path | None = None) -> None:
        """Run per-image preparation; idempotent."""

    @abstractmethod
    def is_prepared(self, image_id: int) -> bool: ...

    @abstractmethod
    def auto_segment(
        self, image_id: int, min_area_fraction: float, confidence_threshold: float
    ) -> list[MaskProposal]:
        """Propose masks for the whole image, largest first, filtered."""

    @abstractmethod
    def prompt(self, image_id: int, prompts: Sequence[PointPrompt]) -> MaskProposal:
        """Infer one mask from point prompts."""

    def close(self) -> None:
        pass

    def __enter__(self) -> "SegmentationBackend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def min_area_threshold(fraction: float, width: int, height: int) -> int:
    """Pixel floor ``ceil(fraction * W * H)``; fraction 0 disables filtering.

    The float product is snapped to 6 decimals first so that e.g. 1% of a
    1000x1000 image is exactly 10000 rather than ceil(10000.000000000002).
    """
    if not (0.0 <= fraction < 1.0):
        raise ValidationError(f"min_area_fraction must be in [0, 1), got {fraction}")
    return math.ceil(round(fraction * width * height, 6))


def filter_proposals(
    proposals: Sequence[MaskProposal],
    width: int,
    height: int,
    min_area_fraction: float,
    confidence_threshold: float,
) -> list[MaskProposal]:
    """Apply the area floor and confidence floor; sort by descending area.

    Empty masks are always dropped.  Ties keep input order, so deterministic
    backends stay deterministic through filtering.
    """
    if not (0.0 <= confidence_threshold <= 1.0):
        raise ValidationError(
            f"confidence_threshold must be in [0, 1], got {confidence_threshold}"
        )
    floor = max(min_area_threshold(min_area_fraction, width, height), 1)
    kept = [
        p
        for p in proposals
        if mask_area(p.mask) >= floor and p.confidence >= confidence_threshold
    ]
    return sorted(kept, key=lambda p: -mask_area(p.mask))


def validate_prompts(
    prompts: Sequence[PointPrompt],
    width: int,
    height: int,
    require_positive: bool = True,
) -> None:
    if not prompts:
        raise ValidationError("at least one prompt is required")
    for p in prompts:
        if not (0 <= p.x < width and 0 <= p.y < height):
            raise ValidationError(
                f"prompt ({p.x}, {p.y}) outside {width}x{height} image"
            )
    if require_positive and not any(p.is_positive for p in prompts):
        raise ValidationError("at least one positive prompt is required")


def split_command(command: str | Sequence[str]) -> list[str]:
    return shlex.split(command) if isinstance(command, str) else list(command)
