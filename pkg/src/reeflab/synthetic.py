"""Seeded synthetic ground truth for desk-scale evaluation and demos.

Images contain disjoint elliptical blob instances separated by a pixel gap,
so prompt simulations can recover them one per prompt and connected-component
segmenters see exactly one component per instance.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import ValidationError
from .evaluation import image_rng
from .gt import GroundTruth
from .masks import mask_area, mask_bbox, rle_decode, rle_encode

_SCENE_COLORS = (
    (240, 120, 110),
    (250, 200, 90),
    (150, 230, 120),
    (130, 200, 250),
    (230, 150, 240),
    (250, 250, 160),
    (180, 240, 220),
    (250, 170, 200),
)
_SCENE_BACKGROUND = (18, 26, 38)


def _try_place_blobs(
    width: int,
    height: int,
    n_blobs: int,
    min_r: int,
    max_r: int,
    min_gap: int,
    rng: np.random.Generator,
) -> list | None:
    yy, xx = np.mgrid[0:height, 0:width]
    placed: list[tuple[int, int, int]] = []  # (cx, cy, outer radius)
    masks = []
    for _ in range(n_blobs):
        for _attempt in range(200):
            a = int(rng.integers(min_r, max_r + 1))
            b = int(rng.integers(min_r, max_r + 1))
            outer = max(a, b)
            if width <= 2 * (outer + 1) or height <= 2 * (outer + 1):
                continue
            cx = int(rng.integers(outer + 1, width - outer - 1))
            cy = int(rng.integers(outer + 1, height - outer - 1))
            if all(
                (cx - px) ** 2 + (cy - py) ** 2 > (outer + pr + min_gap) ** 2
                for px, py, pr in placed
            ):
                placed.append((cx, cy, outer))
                ellipse = ((xx - cx) * b) ** 2 + ((yy - cy) * a) ** 2 <= (a * b) ** 2
                masks.append(rle_encode(ellipse))
                break
        else:
            return None
    return masks


def make_blob_ground_truth(
    image_id: int,
    width: int,
    height: int,
    n_blobs: int,
    rng: np.random.Generator,
    min_gap: int = 3,
) -> GroundTruth:
    """Place ``n_blobs`` disjoint ellipses, restarting with smaller radii
    whenever a random layout leaves no room for the next blob."""
    if n_blobs < 1:
        raise ValidationError("n_blobs must be >= 1")
    base_min = max(min(width, height) // 16, 3)
    base_max = max(min(width, height) // 8, base_min)
    for relax in range(60):
        min_r = max(2, base_min - relax)
        max_r = max(min_r, base_max - relax)
        masks = _try_place_blobs(width, height, n_blobs, min_r, max_r, min_gap, rng)
        if masks is not None:
            return GroundTruth(
                image_id=image_id, width=width, height=height, masks=tuple(masks)
            )
    raise ValidationError(f"cannot place {n_blobs} blobs in a {width}x{height} image")


def make_corpus(
    n_images: int,
    width: int,
    height: int,
    blobs: tuple[int, int] = (3, 10),
    seed: int = 0,
) -> list[GroundTruth]:
    """Generate ``n_images`` ground truths with blob counts drawn from ``blobs``."""
    lo, hi = blobs
    if lo < 1 or hi < lo:
        raise ValidationError(f"bad blob count range {blobs}")
    corpus = []
    for image_id in range(1, n_images + 1):
        rng = image_rng(seed, image_id)
        n = int(rng.integers(lo, hi + 1))
        corpus.append(make_blob_ground_truth(image_id, width, height, n, rng))
    return corpus


def instance_id_image(gt: GroundTruth) -> Image.Image:
    """Grayscale raster where pixel value = 1-based instance index."""
    if len(gt.masks) > 255:
        raise ValidationError("instance-id PNGs support at most 255 instances")
    arr = np.zeros((gt.height, gt.width), dtype=np.uint8)
    for index, mask in enumerate(gt.masks, start=1):
        arr[rle_decode(mask)] = index
    return Image.fromarray(arr, mode="L")


def scene_image(gt: GroundTruth) -> Image.Image:
    """Bright blobs on a dark background; doubles as a segmentable photo stand-in."""
    arr = np.empty((gt.height, gt.width, 3), dtype=np.uint8)
    arr[:, :] = _SCENE_BACKGROUND
    for index, mask in enumerate(gt.masks):
        arr[rle_decode(mask)] = _SCENE_COLORS[index % len(_SCENE_COLORS)]
    return Image.fromarray(arr, mode="RGB")


def corpus_to_coco(corpus: list[GroundTruth]) -> dict:
    """One-category COCO document usable as a simulator ground-truth source."""
    images = [
        {
            "id": gt.image_id,
            "file_name": f"img_{gt.image_id:04d}.png",
            "width": gt.width,
            "height": gt.height,
        }
        for gt in corpus
    ]
    categories = [{"id": 1, "name": "coral", "supercategory": "coral"}]
    annotations = []
    next_id = 1
    for gt in corpus:
        for mask in gt.masks:
            box = mask_bbox(mask)
            annotations.append(
                {
                    "id": next_id,
                    "image_id": gt.image_id,
                    "category_id": 1,
                    "segmentation": mask.to_json(),
                    "area": mask_area(mask),
                    "bbox": box.to_list() if box else [0, 0, 0, 0],
                    "iscrowd": 0,
                    "attributes": {
                        "health": "Unspecified",
                        "source": "manual",
                        "confidence": 1.0,
                    },
                }
            )
            next_id += 1
    return {"images": images, "annotations": annotations, "categories": categories}
