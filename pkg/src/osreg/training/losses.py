"""Supervision terms: decayed sequence loss, geometric-constraint loss, and
their weighted combination."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..geometry.lsr import flow_from_affine_tensor


@dataclass
class LossConfig:
    omega: float = 0.85
    lambda_seq: float = 0.5
    lambda_geo: float = 0.5
    n_iters_train: int = 12
    n_iters_eval: int = 32

    def __post_init__(self) -> None:
        if not 0 < self.omega <= 1:
            raise ValueError(f"omega must lie in (0, 1], got {self.omega}")
        if self.lambda_seq < 0 or self.lambda_geo < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lambda_seq == 0 and self.lambda_geo == 0:
            raise ValueError("at least one loss weight must be positive")
        if min(self.n_iters_train, self.n_iters_eval) < 1:
            raise ValueError("iteration counts must be >= 1")


def masked_mean_l1(pred: torch.Tensor, gt: torch.Tensor, valid: torch.Tensor | None) -> torch.Tensor:
    """Mean over valid pixels of the per-pixel L1 norm |du| + |dv|.

    pred, gt: [B, 2, H, W]; valid: [B, H, W] bool or None (all pixels).
    """
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    per_pixel = (pred - gt).abs().sum(dim=1)  # [B, H, W]
    if valid is None:
        return per_pixel.mean()
    count = valid.sum()
    if count == 0:
        raise ValueError("no valid pixels to average over")
    return (per_pixel * valid.to(per_pixel.dtype)).sum() / count.to(per_pixel.dtype)


def sequence_loss(
    flows: list[torch.Tensor],
    gt: torch.Tensor,
    valid: torch.Tensor | None,
    omega: float = 0.85,
) -> torch.Tensor:
    """Sum of omega^(N-i) * mean-L1(flow_i, gt) over the refinement sequence."""
    if not flows:
        raise ValueError("flow sequence is empty")
    n = len(flows)
    total = None
    for i, flow in enumerate(flows, start=1):
        term = omega ** (n - i) * masked_mean_l1(flow, gt, valid)
        total = term if total is None else total + term
    return total


def geometric_loss(
    phis: list[torch.Tensor],
    gt: torch.Tensor,
    valid: torch.Tensor | None,
    omega: float = 0.85,
) -> torch.Tensor:
    """Sequence loss of the affine-induced flows against the same ground truth."""
    if not phis:
        raise ValueError("affine sequence is empty")
    h, w = gt.shape[-2:]
    flows = [flow_from_affine_tensor(phi, h, w) for phi in phis]
    return sequence_loss(flows, gt, valid, omega)


def total_loss(
    l_seq: torch.Tensor | float,
    l_geo: torch.Tensor | float,
    lambda_seq: float = 0.5,
    lambda_geo: float = 0.5,
):
    return lambda_seq * l_seq + lambda_geo * l_geo
