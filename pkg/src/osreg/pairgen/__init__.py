"""Training/validation/test sample generation from co-registered pairs."""

from .bounds import HARD_BOUNDS, PAPER_BOUNDS, PROFILES, TOY_BOUNDS, TransformBounds, sample_affine
from .dataset import (
    MANIFEST_NAME,
    SampleRecord,
    build_dataset,
    file_digest,
    load_image_f64,
    load_manifest,
    load_sample,
    sample_rng,
    save_image_u8,
)
from .synthesis import (
    RegisteredPair,
    TrainingSample,
    apply_speckle,
    make_sample,
    procedural_optical,
    procedural_pair,
    pseudo_modality,
)

__all__ = [
    "TransformBounds",
    "PAPER_BOUNDS",
    "HARD_BOUNDS",
    "TOY_BOUNDS",
    "PROFILES",
    "sample_affine",
    "RegisteredPair",
    "TrainingSample",
    "make_sample",
    "pseudo_modality",
    "apply_speckle",
    "procedural_optical",
    "procedural_pair",
    "build_dataset",
    "load_manifest",
    "load_sample",
    "sample_rng",
    "save_image_u8",
    "load_image_f64",
    "file_digest",
    "SampleRecord",
    "MANIFEST_NAME",
]
