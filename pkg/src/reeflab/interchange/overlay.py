"""Alpha-blended mask overlays for visualization export.

Blend rule is fixed so outputs are bit-exact: per channel,
``out = (color + base) // 2`` (source-over at alpha 0.5 with integer
arithmetic).  Instances paint in the order given, so the newest annotation
shows on top; unlabeled instances use a fixed gray.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from PIL import Image

from ..errors import DimensionMismatchError
from ..masks import rle_decode
from ..project import Label, LabeledInstance

UNASSIGNED_COLOR = (128, 128, 128)


def _open_rgb(image) -> Image.Image:
    if isinstance(image, Image.Image):
        return image.convert("RGB")
    if isinstance(image, (bytes, bytearray)):
        return Image.open(io.BytesIO(image)).convert("RGB")
    return Image.open(Path(image)).convert("RGB")


def render_overlay(
    image,
    instances: Sequence[LabeledInstance],
    labels: Sequence[Label] | Mapping[int, Label],
) -> bytes:
    """Blend instance masks over the image; returns PNG bytes."""
    if not isinstance(labels, Mapping):
        labels = {label.id: label for label in labels}
    base = _open_rgb(image)
    width, height = base.size
    arr = np.asarray(base, dtype=np.uint16)
    for inst in instances:
        if (inst.mask.width, inst.mask.height) != (width, height):
            raise DimensionMismatchError(
                f"instance {inst.instance_id} mask is "
                f"{inst.mask.width}x{inst.mask.height}, image is {width}x{height}"
            )
        label = labels.get(inst.label_id) if inst.label_id is not None else None
        color = np.asarray(label.rgb() if label else UNASSIGNED_COLOR, dtype=np.uint16)
        region = rle_decode(inst.mask)
        arr[region] = (arr[region] + color) // 2
    out = Image.fromarray(arr.astype(np.uint8), mode="RGB")
    buffer = io.BytesIO()
    out.save(buffer, format="PNG")
    return buffer.getvalue()
