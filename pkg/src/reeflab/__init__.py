"""reeflab: dense-mask reef image labeling, statistics, and effort simulation."""

from __future__ import annotations

__version__ = "0.1.0"

from .analytics import (
    HealthBreakdown,
    LabelBreakdown,
    StatsReport,
    bleaching_percentage,
    image_stats,
    mortality_rate,
    project_stats,
    semantic_raster,
)
from .backends import (
    BackendDescriptor,
    MaskProposal,
    OracleBackend,
    PointPrompt,
    Polarity,
    SegmentationBackend,
    SubprocessBackend,
    create_backend,
)
from .errors import (
    BackendUnavailableError,
    ConflictError,
    CorruptMaskError,
    CorruptProjectError,
    DimensionMismatchError,
    NotFoundError,
    ReefLabError,
    UnsupportedVersionError,
    ValidationError,
)
from .evaluation import (
    GroundTruth,
    LocationResult,
    SimCurve,
    aggregate_locations,
    estimate_coverage_sparse,
    evaluate_auto,
    image_rng,
    mae,
    pixel_accuracy,
    simulate_prompts,
    simulate_sparse,
)
from .gt import ground_truth_from_coco, ground_truth_from_png, load_ground_truth
from .interchange import (
    export_coco,
    export_coco_bytes,
    import_coco,
    instances_csv,
    locations_csv,
    render_overlay,
    stats_csv,
    to_project,
)
from .masks import (
    BACKGROUND_VALUE,
    UNASSIGNED_VALUE,
    BBox,
    BinaryMask,
    flatten_to_semantic,
    mask_area,
    mask_bbox,
    mask_boolean,
    rle_decode,
    rle_encode,
)
from .project import (
    HealthStatus,
    ImageEntry,
    InstanceSource,
    Label,
    LabeledInstance,
    Project,
    ProjectConfig,
    create_project,
    load_project,
    sample_images,
    save_project,
)
