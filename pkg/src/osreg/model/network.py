"""The registration network: shared encoder, attention fusion, correlation
pyramid, recurrent refinement, convex upsampling, and the affine head."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..geometry.lsr import lsr_fit_tensor
from .attention import AttentionFusion, add_positional_encoding
from .config import DOWNSAMPLE, ModelConfig
from .corr import CorrelationPyramid
from .encoder import ConvEncoder
from .update import UpdateBlock, convex_upsample

CHECKPOINT_FORMAT = 1


@dataclass
class ModelOutput:
    """Aligned per-iteration predictions: full-resolution flows [B, 2, H, W]
    and, in `ls`/`lsr` mode, one 2x3 affine per iteration."""

    flows: list[torch.Tensor]
    phis: list[torch.Tensor] = field(default_factory=list)
    attention: dict[str, torch.Tensor] | None = None

    @property
    def final_flow(self) -> torch.Tensor:
        return self.flows[-1]


def coords_grid(b: int, h: int, w: int, device, dtype) -> torch.Tensor:
    ys = torch.arange(h, device=device, dtype=dtype)
    xs = torch.arange(w, device=device, dtype=dtype)
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")
    return torch.stack([gx, gy], dim=0)[None].expand(b, 2, h, w).contiguous()


class RegistrationNetwork(nn.Module):
    """Predicts dense optical->SAR flow plus a least-squares affine per iteration."""

    def __init__(self, cfg: ModelConfig | None = None):
        super().__init__()
        self.cfg = cfg or ModelConfig()
        c = self.cfg
        self.fnet = ConvEncoder(c.encoder_widths, c.feat_dim, in_channels=3)
        self.cnet = ConvEncoder(c.encoder_widths, c.hidden_dim + c.context_dim, in_channels=3)
        if c.self_attn_levels + c.cross_attn_levels > 0:
            self.fusion = AttentionFusion(
                c.feat_dim,
                self_attn_levels=c.self_attn_levels,
                cross_attn_levels=c.cross_attn_levels,
                heads=c.attn_heads,
                ffn_expansion=c.ffn_expansion,
                window_splits=c.window_splits,
            )
        else:
            self.fusion = None
        corr_planes = c.corr_levels * (2 * c.corr_radius + 1) ** 2
        self.update = UpdateBlock(corr_planes, c.hidden_dim, c.context_dim)

    def _pad(self, x: torch.Tensor) -> tuple[torch.Tensor, tuple[int, int]]:
        mult = self.cfg.pad_multiple
        h, w = x.shape[-2:]
        ph = (-h) % mult
        pw = (-w) % mult
        if ph or pw:
            x = F.pad(x, (0, pw, 0, ph))
        return x, (ph, pw)

    @staticmethod
    def _as_three_channels(img: torch.Tensor) -> torch.Tensor:
        if img.shape[1] == 3:
            return img
        if img.shape[1] == 1:
            return img.repeat(1, 3, 1, 1)
        raise ValueError(f"expected 1 or 3 channels, got {img.shape[1]}")

    def extract_features(self, optical: torch.Tensor, sar: torch.Tensor, export: dict | None = None):
        """Shared-weight encoding, position encoding, and attention fusion."""
        f_opt = self.fnet(self._as_three_channels(optical))
        f_sar = self.fnet(self._as_three_channels(sar))
        if self.cfg.use_pos_encoding:
            f_opt = add_positional_encoding(f_opt)
            f_sar = add_positional_encoding(f_sar)
        if self.fusion is not None:
            f_opt, f_sar = self.fusion(f_opt, f_sar, export=export)
        return f_opt, f_sar

    def forward(
        self,
        optical: torch.Tensor,
        sar: torch.Tensor,
        n_iters: int = 12,
        mode: str = "lsr",
        export_attention: bool = False,
    ) -> ModelOutput:
        """Run `n_iters` refinement steps from a zero initial flow.

        mode "lsr" fits the affine inside the graph for every iteration,
        "ls" fits outside the graph (pure post-processing, identical flows),
        "none" returns flows only.
        """
        if n_iters < 1:
            raise ValueError("n_iters must be >= 1")
        if mode not in ("none", "ls", "lsr"):
            raise ValueError(f"unknown mode {mode!r}")
        if optical.shape[-2:] != sar.shape[-2:]:
            raise ValueError("optical and sar spatial sizes differ")

        h_in, w_in = optical.shape[-2:]
        optical, pads = self._pad(optical)
        sar, _ = self._pad(sar)

        export: dict | None = {} if export_attention else None
        f_opt, f_sar = self.extract_features(optical, sar, export=export)
        corr = CorrelationPyramid(f_opt, f_sar, self.cfg.corr_levels, self.cfg.corr_radius)

        cmap = self.cnet(self._as_three_channels(optical))
        hidden = torch.tanh(cmap[:, : self.cfg.hidden_dim])
        context = torch.relu(cmap[:, self.cfg.hidden_dim :])

        b, _, hp, wp = optical.shape
        h8, w8 = hp // DOWNSAMPLE, wp // DOWNSAMPLE
        coords0 = coords_grid(b, h8, w8, optical.device, f_opt.dtype)
        coords1 = coords0.clone()

        flows: list[torch.Tensor] = []
        flows_lr: list[torch.Tensor] = []
        for _ in range(n_iters):
            coords1 = coords1.detach()
            corr_feat = corr.lookup(coords1)
            flow_lr = coords1 - coords0
            hidden, mask, delta = self.update(hidden, context, corr_feat, flow_lr)
            coords1 = coords1 + delta
            flow_up = convex_upsample(coords1 - coords0, mask)
            flows.append(flow_up[..., :h_in, :w_in])
            flows_lr.append(coords1 - coords0)

        phis: list[torch.Tensor] = []
        if mode in ("ls", "lsr"):
            for flow_full, flow_lr in zip(flows, flows_lr):
                if self.cfg.lsr_resolution == "eighth":
                    src = flow_lr * DOWNSAMPLE
                    fit = lsr_fit_tensor(
                        src if mode == "lsr" else src.detach(),
                        origin=((DOWNSAMPLE - 1) / 2.0, (DOWNSAMPLE - 1) / 2.0),
                        step=float(DOWNSAMPLE),
                    )
                else:
                    src = flow_full
                    fit = lsr_fit_tensor(src if mode == "lsr" else src.detach())
                phis.append(fit)

        return ModelOutput(flows=flows, phis=phis, attention=export)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def save_checkpoint(path, model: RegistrationNetwork, step: int = 0, extra: dict | None = None) -> None:
    """Self-describing archive: weights, config block, training step counter."""
    payload = {
        "format_version": CHECKPOINT_FORMAT,
        "model_config": model.cfg.to_dict(),
        "model_state": model.state_dict(),
        "step": step,
        "extra": extra or {},
    }
    torch.save(payload, path)


def load_checkpoint(path, map_location="cpu") -> tuple[RegistrationNetwork, dict]:
    payload = torch.load(path, map_location=map_location, weights_only=False)
    if payload.get("format_version") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format in {path}")
    model = RegistrationNetwork(ModelConfig.from_dict(payload["model_config"]))
    model.load_state_dict(payload["model_state"])
    model.eval()
    return model, payload


def write_attention_sidecar(flow_path, attention: dict[str, torch.Tensor]) -> Path:
    """Dump exported attention matrices next to a flow file as an .npz sidecar."""
    sidecar = Path(str(flow_path) + ".attn.npz")
    arrays = {k: v.cpu().numpy().astype(np.float32) for k, v in attention.items()}
    np.savez_compressed(sidecar, **arrays)
    return sidecar
