"""Segmentation backends: the protocol, the ground-truth oracle, and the
newline-delimited-JSON subprocess client."""

from __future__ import annotations

from .base import (
    BackendDescriptor,
    MaskProposal,
    PointPrompt,
    Polarity,
    SegmentationBackend,
    filter_proposals,
    min_area_threshold,
    validate_prompts,
)
from .oracle import OracleBackend, disk_structure, erode_mask
from .subproc import SubprocessBackend

__all__ = [
    "BackendDescriptor",
    "MaskProposal",
    "PointPrompt",
    "Polarity",
    "SegmentationBackend",
    "OracleBackend",
    "SubprocessBackend",
    "create_backend",
    "disk_structure",
    "erode_mask",
    "filter_proposals",
    "min_area_threshold",
    "validate_prompts",
]


def create_backend(descriptor: BackendDescriptor | str) -> SegmentationBackend:
    """Instantiate the backend a descriptor (or its text form) names."""
    if isinstance(descriptor, str):
        descriptor = BackendDescriptor.parse(descriptor)
    if descriptor.kind == "oracle":
        return OracleBackend.from_descriptor(descriptor)
    return SubprocessBackend.from_descriptor(descriptor)
