"""Protocol-level checks every segmentation backend must satisfy.

Run over a corpus the backend can recover exactly (oracle at erosion 0, or a
stub model on synthetic scenes): proposals match ground truth, prompts return
the containing instance, preparation gates calls, and everything is
deterministic.  The adapter conformance suite reuses this unchanged.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from reeflab import ValidationError
from reeflab.backends import PointPrompt, min_area_threshold
from reeflab.gt import GroundTruth
from reeflab.masks import mask_area, rle_decode


def point_inside(mask) -> tuple[int, int]:
    raster = rle_decode(mask)
    ys, xs = np.nonzero(raster)
    return int(xs[0]), int(ys[0])


def background_point(gt: GroundTruth) -> tuple[int, int] | None:
    free = ~gt.union
    if not free.any():
        return None
    ys, xs = np.nonzero(free)
    return int(xs[0]), int(ys[0])


def assert_backend_contract(
    backend, corpus: dict[int, GroundTruth], image_paths: dict[int, Path]
) -> None:
    first = sorted(corpus)[0]
    with pytest.raises(ValidationError):
        backend.auto_segment(first, 0.0, 0.0)
    with pytest.raises(ValidationError):
        backend.prompt(first, [PointPrompt(x=0, y=0)])

    for image_id in sorted(corpus):
        assert not backend.is_prepared(image_id)
        backend.prepare(image_id, image_paths.get(image_id))
        assert backend.is_prepared(image_id)
        backend.prepare(image_id, image_paths.get(image_id))  # idempotent no-op

    for image_id, gt in sorted(corpus.items()):
        proposals = backend.auto_segment(image_id, 0.0, 0.0)
        areas = [mask_area(p.mask) for p in proposals]
        assert areas == sorted(areas, reverse=True), "proposals must be largest-first"
        assert all(
            (p.mask.width, p.mask.height) == (gt.width, gt.height) for p in proposals
        )
        assert {p.mask for p in proposals} == set(gt.masks), "auto must recover ground truth"

        # the area filter keeps exactly the largest instance(s)
        fraction = max(areas) / (gt.width * gt.height)
        floor = min_area_threshold(fraction, gt.width, gt.height)
        filtered = backend.auto_segment(image_id, fraction, 0.0)
        assert sorted(mask_area(p.mask) for p in filtered) == sorted(
            a for a in areas if a >= floor
        )

        for mask in gt.masks:
            x, y = point_inside(mask)
            proposal = backend.prompt(image_id, [PointPrompt(x=x, y=y)])
            assert proposal.mask == mask, "prompt must return the containing instance"
            assert proposal.confidence == 1.0

        free = background_point(gt)
        if free is not None:
            proposal = backend.prompt(image_id, [PointPrompt(x=free[0], y=free[1])])
            assert mask_area(proposal.mask) == 0
            assert proposal.confidence == 0.0

        # auto output invariant to prompt history, and deterministic
        assert backend.auto_segment(image_id, 0.0, 0.0) == proposals

        with pytest.raises(ValidationError):
            backend.prompt(image_id, [])
        with pytest.raises(ValidationError):
            backend.prompt(image_id, [PointPrompt(x=gt.width, y=0)])
