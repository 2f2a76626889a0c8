"""Affine/flow algebra: parameter construction, flow synthesis, least-squares
affine fitting, warping, and grid utilities. All functions are pure."""

from .affine import (
    AffineParams,
    SingularTransformError,
    affine_from_params,
    compose_affine,
    invert_affine,
    read_affine_text,
    recenter_affine,
    shift_affine_frame,
    write_affine_text,
)
from .flow import FlowField, PixelGrid, center_crop, flow_from_affine, pixel_grid, warp_image
from .flowio import read_flow, write_flow
from .lsr import DegenerateSupportError, flow_from_affine_tensor, lsr_fit, lsr_fit_tensor

__all__ = [
    "AffineParams",
    "SingularTransformError",
    "DegenerateSupportError",
    "FlowField",
    "PixelGrid",
    "affine_from_params",
    "compose_affine",
    "invert_affine",
    "recenter_affine",
    "shift_affine_frame",
    "read_affine_text",
    "write_affine_text",
    "center_crop",
    "flow_from_affine",
    "pixel_grid",
    "warp_image",
    "read_flow",
    "write_flow",
    "lsr_fit",
    "lsr_fit_tensor",
    "flow_from_affine_tensor",
]
