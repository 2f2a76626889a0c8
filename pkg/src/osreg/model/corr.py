"""All-pairs correlation pyramid with windowed bilinear lookup."""

from __future__ import annotations

import torch
import torch.nn.functional as F


def bilinear_sampler(volume: torch.Tensor, coords: torch.Tensor) -> torch.Tensor:
    """grid_sample wrapper taking pixel coordinates; zero padding outside."""
    h, w = volume.shape[-2:]
    xg, yg = coords.split(1, dim=-1)
    xg = 2 * xg / max(w - 1, 1) - 1
    yg = 2 * yg / max(h - 1, 1) - 1
    grid = torch.cat([xg, yg], dim=-1)
    return F.grid_sample(volume, grid, align_corners=True)


class CorrelationPyramid:
    """Scaled dot-product volume between two feature maps plus pooled levels.

    Level 0 holds <f1(i), f2(j)> / sqrt(C) for every cell pair; each coarser
    level average-pools the target dimensions by 2.
    """

    def __init__(self, fmap1: torch.Tensor, fmap2: torch.Tensor, num_levels: int = 4, radius: int = 4):
        if fmap1.shape != fmap2.shape:
            raise ValueError(f"feature shapes differ: {tuple(fmap1.shape)} vs {tuple(fmap2.shape)}")
        self.num_levels = num_levels
        self.radius = radius
        b, c, h, w = fmap1.shape
        self.shape = (b, h, w)

        f1 = fmap1.reshape(b, c, h * w)
        f2 = fmap2.reshape(b, c, h * w)
        corr = torch.matmul(f1.transpose(1, 2), f2) / (c**0.5)
        corr = corr.reshape(b * h * w, 1, h, w)

        self.levels = [corr]
        for _ in range(num_levels - 1):
            if min(corr.shape[-2:]) >= 2:
                corr = F.avg_pool2d(corr, 2, stride=2)
            self.levels.append(corr)

    def lookup(self, coords: torch.Tensor) -> torch.Tensor:
        """Sample (2r+1)^2 neighborhoods around `coords` at every level.

        coords: [B, 2, H, W] target positions in level-0 cells. Returns
        [B, num_levels*(2r+1)^2, H, W].
        """
        r = self.radius
        b, h, w = self.shape
        coords = coords.permute(0, 2, 3, 1)  # [B, H, W, 2]

        out = []
        for lvl, volume in enumerate(self.levels):
            dx = torch.linspace(-r, r, 2 * r + 1, device=coords.device, dtype=coords.dtype)
            dy = torch.linspace(-r, r, 2 * r + 1, device=coords.device, dtype=coords.dtype)
            delta = torch.stack(torch.meshgrid(dy, dx, indexing="ij"), dim=-1)
            delta = delta[..., (1, 0)]  # (dy, dx) -> (dx, dy) to match coords

            centroid = coords.reshape(b * h * w, 1, 1, 2) / 2**lvl
            window = centroid + delta.view(1, 2 * r + 1, 2 * r + 1, 2)
            sampled = bilinear_sampler(volume.to(coords.dtype), window)
            out.append(sampled.view(b, h, w, -1))

        return torch.cat(out, dim=-1).permute(0, 3, 1, 2).contiguous()
