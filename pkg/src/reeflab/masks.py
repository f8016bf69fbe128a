"""Binary masks stored as run-length encodings, plus raster geometry helpers.

Masks are encoded over the column-major (top-to-bottom, then left-to-right)
flattening of the raster as alternating run lengths, the first run counting
zeros.  This is exactly the uncompressed RLE object layout of the COCO
interchange format, so masks cross module and file boundaries without
re-encoding.

Rasters are numpy arrays of shape ``(height, width)``; pixel ``(x, y)`` is
``raster[y, x]``.  All values here are immutable after construction and safe
to share between concurrent tasks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import CorruptMaskError, DimensionMismatchError, ValidationError

# Reserved semantic-raster values: label ids occupy 1..N.
BACKGROUND_VALUE = 0
UNASSIGNED_VALUE = int(np.iinfo(np.uint32).max)

BOOLEAN_OPS = ("union", "intersection", "difference", "xor")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel box; ``(x, y)`` is the top-left corner."""

    x: int
    y: int
    w: int
    h: int

    def to_list(self) -> list[int]:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True)
class BinaryMask:
    """An RLE-encoded binary raster.

    ``counts`` always satisfies: every element non-negative, only the first
    may be zero, and the total equals ``width * height``.  Construction
    rejects anything else, so a ``BinaryMask`` in hand is always canonical.
    """

    width: int
    height: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise DimensionMismatchError(
                f"mask dimensions must be positive, got {self.width}x{self.height}"
            )
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if any(c < 0 for c in counts):
            raise CorruptMaskError("negative run length")
        if any(c == 0 for c in counts[1:]):
            raise CorruptMaskError("zero-length run after the first")
        total = sum(counts)
        if total != self.width * self.height:
            raise CorruptMaskError(
                f"run lengths sum to {total}, expected {self.width * self.height}"
            )

    @classmethod
    def from_raster(cls, raster) -> "BinaryMask":
        return rle_encode(raster)

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(width=width, height=height, counts=(width * height,))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(width=width, height=height, counts=(0, width * height))

    @classmethod
    def from_json(cls, obj: dict) -> "BinaryMask":
        """Parse the COCO uncompressed RLE object ``{"size":[H,W],"counts":[...]}``."""
        try:
            height, width = obj["size"]
            counts = obj["counts"]
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptMaskError(f"malformed RLE object: {exc}") from exc
        if not isinstance(counts, (list, tuple)):
            raise CorruptMaskError("RLE counts must be a list of integers")
        return cls(width=int(width), height=int(height), counts=tuple(counts))

    def to_json(self) -> dict:
        return {"size": [self.height, self.width], "counts": list(self.counts)}

    def to_raster(self) -> NDArray[np.bool_]:
        return rle_decode(self)

    @property
    def area(self) -> int:
        return mask_area(self)


def rle_encode(raster) -> BinaryMask:
    """Encode a binary raster into canonical RLE form."""
    arr = np.asarray(raster)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-D raster, got {arr.ndim}-D")
    height, width = arr.shape
    if height == 0 or width == 0:
        raise DimensionMismatchError("zero-area raster")
    flat = arr.ravel(order="F") != 0
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], changes, [flat.size]))
    counts = [int(c) for c in np.diff(edges)]
    if flat[0]:
        counts.insert(0, 0)
    return BinaryMask(width=int(width), height=int(height), counts=tuple(counts))


def rle_decode(mask: BinaryMask) -> NDArray[np.bool_]:
    """Decode to a ``(height, width)`` boolean raster; exact inverse of encode."""
    values = np.arange(len(mask.counts), dtype=np.uint8) % 2
    flat = np.repeat(values, np.asarray(mask.counts, dtype=np.int64)).astype(bool)
    return flat.reshape((mask.height, mask.width), order="F")


def mask_area(mask: BinaryMask) -> int:
    """Number of set pixels; the sum of the one-runs."""
    return int(sum(mask.counts[1::2]))


def mask_bbox(mask: BinaryMask) -> BBox | None:
    """Tight box over set pixels, or None for an empty mask."""
    if mask_area(mask) == 0:
        return None
    raster = rle_decode(mask)
    rows = np.flatnonzero(raster.any(axis=1))
    cols = np.flatnonzero(raster.any(axis=0))
    x, y = int(cols[0]), int(rows[0])
    return BBox(x=x, y=y, w=int(cols[-1]) - x + 1, h=int(rows[-1]) - y + 1)


def mask_boolean(a: BinaryMask, b: BinaryMask, op: str) -> BinaryMask:
    """Pixel-wise ``union | intersection | difference | xor`` of same-size masks."""
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatchError(
            f"mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    ra, rb = rle_decode(a), rle_decode(b)
    if op == "union":
        out = ra | rb
    elif op == "intersection":
        out = ra & rb
    elif op == "difference":
        out = ra & ~rb
    elif op == "xor":
        out = ra ^ rb
    else:
        raise ValidationError(f"unknown boolean op {op!r}, expected one of {BOOLEAN_OPS}")
    return rle_encode(out)


def flatten_to_semantic(
    layers: Iterable[tuple[BinaryMask, int]], width: int, height: int
) -> NDArray[np.uint32]:
    """Paint ``(mask, value)`` layers in order onto a background raster.

    Later layers override earlier ones, so passing instances in ascending
    creation order makes the newest annotation win overlaps.  Values are
    label ids (1..N) or :data:`UNASSIGNED_VALUE`; uncovered pixels stay
    :data:`BACKGROUND_VALUE`.
    """
    if width <= 0 or height <= 0:
        raise DimensionMismatchError("raster dimensions must be positive")
    out = np.full((height, width), BACKGROUND_VALUE, dtype=np.uint32)
    for mask, value in layers:
        if (mask.width, mask.height) != (width, height):
            raise DimensionMismatchError(
                f"layer is {mask.width}x{mask.height}, raster is {width}x{height}"
            )
        out[rle_decode(mask)] = value
    return out
