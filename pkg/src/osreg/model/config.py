"""Model hyperparameters. All width/depth knobs live here."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

DOWNSAMPLE = 8  # fixed encoder stride product


@dataclass
class ModelConfig:
    feat_dim: int = 128
    encoder_widths: tuple[int, ...] = (48, 72, 96)
    hidden_dim: int = 96
    context_dim: int = 64
    corr_levels: int = 4
    corr_radius: int = 4
    use_pos_encoding: bool = True
    self_attn_levels: int = 0
    cross_attn_levels: int = 2
    attn_heads: int = 1
    ffn_expansion: int = 2
    window_splits: int = 2  # 2x2 partition = 4 windows
    lsr_resolution: str = "full"  # "full" | "eighth"

    def __post_init__(self) -> None:
        self.encoder_widths = tuple(self.encoder_widths)
        if len(self.encoder_widths) != 3:
            raise ValueError("encoder_widths must list exactly 3 stage widths")
        if self.feat_dim % 4 != 0:
            raise ValueError("feat_dim must be divisible by 4 for the positional encoding")
        if self.feat_dim % self.attn_heads != 0:
            raise ValueError("feat_dim must be divisible by attn_heads")
        if self.lsr_resolution not in ("full", "eighth"):
            raise ValueError(f"unknown lsr_resolution {self.lsr_resolution!r}")
        if self.corr_levels < 1 or self.corr_radius < 1:
            raise ValueError("corr_levels and corr_radius must be >= 1")
        if min(self.self_attn_levels, self.cross_attn_levels) < 0:
            raise ValueError("attention level counts cannot be negative")

    @property
    def pad_multiple(self) -> int:
        # Feature cells must tile into windows exactly.
        if self.self_attn_levels + self.cross_attn_levels > 0:
            return DOWNSAMPLE * self.window_splits
        return DOWNSAMPLE

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)

    @classmethod
    def toy(cls, **overrides) -> "ModelConfig":
        """Narrow profile sized for CPU-only desk runs."""
        base = dict(
            feat_dim=64,
            encoder_widths=(24, 32, 48),
            hidden_dim=64,
            context_dim=32,
            corr_levels=3,
            corr_radius=3,
        )
        base.update(overrides)
        return cls(**base)
