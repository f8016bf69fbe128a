"""Pixel metrics, annotation-effort simulators, and per-location aggregation.

Randomness policy: every simulator draws from a PCG64 generator whose stream
is derived as ``SeedSequence((master_seed, image_id))``, so runs are
bit-deterministic given (seed, inputs) and independent across images
regardless of scheduling order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .backends.base import PointPrompt, Polarity, SegmentationBackend
from .errors import DimensionMismatchError, ValidationError
from .gt import GroundTruth
from .masks import rle_decode

SPARSE = "sparse"
PROMPT = "prompt"
AUTO = "auto"

# How unlabeled pixels count in sparse-method accuracy: "incorrect" treats
# every unlabeled pixel as wrong (accuracy grows linearly with labeled
# fraction), "background" fills them with the non-coral default.
UNLABELED_POLICIES = ("incorrect", "background")


@dataclass(frozen=True)
class SimCurve:
    """Accuracy as a function of annotation effort (points or prompts)."""

    method: str
    seed: int
    points: tuple[tuple[int, float], ...]

    def __post_init__(self):
        efforts = [e for e, _ in self.points]
        if any(b <= a for a, b in zip(efforts, efforts[1:])):
            raise ValidationError("curve efforts must be strictly increasing")
        if any(not (0.0 <= acc <= 1.0) for _, acc in self.points):
            raise ValidationError("curve accuracies must be in [0, 1]")

    @property
    def final_accuracy(self) -> float:
        return self.points[-1][1] if self.points else 0.0


@dataclass(frozen=True)
class LocationResult:
    location: str
    accuracies: tuple[float, ...]
    mean: float


def image_rng(seed: int, image_id: int) -> np.random.Generator:
    """Per-image random stream: PCG64 seeded with SeedSequence((seed, image_id))."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, image_id))))


def _as_binary(raster) -> np.ndarray:
    arr = np.asarray(raster)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-D raster, got {arr.ndim}-D")
    return arr != 0


def pixel_accuracy(pred, gt) -> float:
    """Fraction of pixels whose coral/non-coral value matches."""
    p, g = _as_binary(pred), _as_binary(gt)
    if p.shape != g.shape:
        raise DimensionMismatchError(f"raster shapes differ: {p.shape} vs {g.shape}")
    return int((p == g).sum()) / p.size


def mae(pred, gt) -> float:
    """Mean absolute error over binary pixel labels; 1 - pixel_accuracy."""
    p, g = _as_binary(pred), _as_binary(gt)
    if p.shape != g.shape:
        raise DimensionMismatchError(f"raster shapes differ: {p.shape} vs {g.shape}")
    return int((p != g).sum()) / p.size


def _sample_positions(gt: GroundTruth, n_points: int, seed: int) -> np.ndarray:
    total = gt.total_pixels
    if n_points < 1:
        raise ValidationError(f"n_points must be >= 1, got {n_points}")
    if n_points > total:
        raise ValidationError(f"n_points {n_points} exceeds pixel count {total}")
    rng = image_rng(seed, gt.image_id)
    return rng.choice(total, size=n_points, replace=False)


def simulate_sparse(
    gt: GroundTruth,
    n_points: int,
    seed: int,
    schedule: Sequence[int] | None = None,
    unlabeled: str = "incorrect",
) -> SimCurve:
    """Scatter ``n_points`` distinct pixels, label each correctly from ground
    truth, and record accuracy after every point (or each count in
    ``schedule``).

    Under the default ``unlabeled="incorrect"`` policy the accuracy after k
    points is exactly ``k / total_pixels``.
    """
    if unlabeled not in UNLABELED_POLICIES:
        raise ValidationError(f"unlabeled policy must be one of {UNLABELED_POLICIES}")
    positions = _sample_positions(gt, n_points, seed)
    total = gt.total_pixels
    steps = list(schedule) if schedule is not None else list(range(1, n_points + 1))
    if any(k < 1 or k > n_points for k in steps):
        raise ValidationError("schedule entries must be within [1, n_points]")
    if unlabeled == "incorrect":
        points = tuple((k, k / total) for k in steps)
    else:
        coral_flat = gt.union.ravel(order="C")
        non_coral_total = total - int(coral_flat.sum())
        sampled_coral = np.cumsum(coral_flat[positions])
        points = []
        for k in steps:
            coral_in_sample = int(sampled_coral[k - 1])
            non_coral_in_sample = k - coral_in_sample
            correct = k + (non_coral_total - non_coral_in_sample)
            points.append((k, correct / total))
        points = tuple(points)
    return SimCurve(method=SPARSE, seed=seed, points=points)


def estimate_coverage_sparse(gt: GroundTruth, n_points: int, seed: int) -> float:
    """Point-count coverage estimate: fraction of sampled pixels on coral."""
    positions = _sample_positions(gt, n_points, seed)
    coral_flat = gt.union.ravel(order="C")
    return int(coral_flat[positions].sum()) / n_points


def _pick_pixel(region: np.ndarray, rng: np.random.Generator, width: int) -> tuple[int, int]:
    flat = np.flatnonzero(region.ravel(order="C"))
    idx = int(flat[rng.integers(len(flat))])
    return idx % width, idx // width


def simulate_prompts(
    gt: GroundTruth, backend: SegmentationBackend, budget: int, seed: int
) -> SimCurve:
    """Iterative point-prompt refinement against a backend.

    Each step samples a pixel from the false-negative region (positive
    prompt) when one exists, else from the false-positive region (negative
    prompt), else stops early with accuracy 1.  The running prediction is the
    union of positively-prompted masks minus the union of negatively-prompted
    masks; accuracy is recorded after every prompt.
    """
    if budget < 1:
        raise ValidationError(f"budget must be >= 1, got {budget}")
    target = gt.union
    if not target.any():
        raise ValidationError("ground truth contains no coral pixels to sample")
    if not backend.is_prepared(gt.image_id):
        raise ValidationError(f"backend is not prepared for image {gt.image_id}")
    rng = image_rng(seed, gt.image_id)
    positive = np.zeros_like(target)
    negative = np.zeros_like(target)
    points: list[tuple[int, float]] = []
    for step in range(1, budget + 1):
        prediction = positive & ~negative
        false_negative = target & ~prediction
        false_positive = prediction & ~target
        if false_negative.any():
            x, y = _pick_pixel(false_negative, rng, gt.width)
            polarity = Polarity.POSITIVE
        elif false_positive.any():
            x, y = _pick_pixel(false_positive, rng, gt.width)
            polarity = Polarity.NEGATIVE
        else:
            break
        proposal = backend.prompt(gt.image_id, [PointPrompt(x=x, y=y, polarity=polarity)])
        returned = rle_decode(proposal.mask)
        if polarity == Polarity.POSITIVE:
            positive |= returned
        else:
            negative |= returned
        prediction = positive & ~negative
        points.append((step, pixel_accuracy(prediction, target)))
    return SimCurve(method=PROMPT, seed=seed, points=tuple(points))


def evaluate_auto(
    gt: GroundTruth,
    backend: SegmentationBackend,
    min_area_fraction: float = 0.0,
    confidence_threshold: float = 0.0,
) -> float:
    """Accuracy of the unrefined automatic proposals' union against ground truth."""
    proposals = backend.auto_segment(gt.image_id, min_area_fraction, confidence_threshold)
    prediction = np.zeros((gt.height, gt.width), dtype=bool)
    for proposal in proposals:
        prediction |= rle_decode(proposal.mask)
    return pixel_accuracy(prediction, gt.union)


def aggregate_locations(results: Mapping[str, Sequence[float]]) -> list[LocationResult]:
    """Arithmetic-mean accuracy per location, sorted by location name."""
    out = []
    for location in sorted(results):
        accuracies = [float(a) for a in results[location]]
        if not accuracies:
            raise ValidationError(f"location {location!r} has no accuracies")
        if any(not (0.0 <= a <= 1.0) for a in accuracies):
            raise ValidationError(f"location {location!r} has accuracies outside [0, 1]")
        out.append(
            LocationResult(
                location=location,
                accuracies=tuple(accuracies),
                mean=sum(accuracies) / len(accuracies),
            )
        )
    return out
