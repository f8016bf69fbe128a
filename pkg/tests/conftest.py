from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))

from reeflab import (
    BinaryMask,
    HealthStatus,
    Label,
    Project,
    ProjectConfig,
    rle_encode,
)

PALETTE = [
    "#FF0000", "#00FF00", "#0000FF", "#FFFF00", "#FF00FF", "#00FFFF",
    "#800000", "#008000", "#000080", "#808000",
]


def make_png(path: Path, width: int, height: int, color=(10, 60, 90)) -> Path:
    img = Image.new("RGB", (width, height), color)
    img.save(path, format="PNG")
    return path


def random_mask(rng: np.random.Generator, width: int, height: int, density=0.4) -> BinaryMask:
    """A non-empty random mask."""
    while True:
        raster = rng.random((height, width)) < density
        if raster.any():
            return rle_encode(raster)


def random_project(rng: np.random.Generator, max_images=3, max_side=12,
                   max_labels=3, max_instances=5) -> Project:
    """Seeded project with random taxonomy, instances, labels, and health."""
    project = Project(config=ProjectConfig(min_area_fraction=0.0))
    n_labels = int(rng.integers(0, max_labels + 1))
    project.define_labels(
        [Label(id=i + 1, name=f"sp{i + 1}", color=PALETTE[i]) for i in range(n_labels)]
    )
    n_images = int(rng.integers(1, max_images + 1))
    for i in range(n_images):
        width = int(rng.integers(2, max_side + 1))
        height = int(rng.integers(2, max_side + 1))
        image_id = project.add_image(f"img_{i + 1}.png", width, height)
        for _ in range(int(rng.integers(0, max_instances + 1))):
            instance_id = project.add_instance(image_id, random_mask(rng, width, height))
            if n_labels and rng.random() < 0.7:
                project.assign_label(
                    image_id, instance_id, int(rng.integers(1, n_labels + 1))
                )
            project.assign_health(
                image_id,
                instance_id,
                list(HealthStatus)[int(rng.integers(0, len(HealthStatus)))],
            )
    return project


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
