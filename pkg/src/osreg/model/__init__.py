"""Dense registration network and its building blocks."""

from .attention import (
    AttentionFusion,
    CrossAttentionBlock,
    add_positional_encoding,
    positional_encoding_2d,
    window_merge,
    window_partition,
)
from .config import DOWNSAMPLE, ModelConfig
from .corr import CorrelationPyramid
from .encoder import ConvEncoder
from .network import (
    ModelOutput,
    RegistrationNetwork,
    coords_grid,
    count_parameters,
    load_checkpoint,
    save_checkpoint,
    write_attention_sidecar,
)
from .update import UpdateBlock, convex_upsample

__all__ = [
    "ModelConfig",
    "DOWNSAMPLE",
    "RegistrationNetwork",
    "ModelOutput",
    "ConvEncoder",
    "AttentionFusion",
    "CrossAttentionBlock",
    "CorrelationPyramid",
    "UpdateBlock",
    "convex_upsample",
    "coords_grid",
    "count_parameters",
    "positional_encoding_2d",
    "add_positional_encoding",
    "window_partition",
    "window_merge",
    "save_checkpoint",
    "load_checkpoint",
    "write_attention_sidecar",
]
