"""Recurrent flow refinement: motion encoding, GRU update, convex upsampling."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import DOWNSAMPLE


class MotionEncoder(nn.Module):
    """Fuses correlation lookups with the current flow estimate."""

    def __init__(self, corr_planes: int, dim: int):
        super().__init__()
        self.convc1 = nn.Conv2d(corr_planes, 2 * dim, 1)
        self.convc2 = nn.Conv2d(2 * dim, dim, 3, padding=1)
        self.convf1 = nn.Conv2d(2, dim, 7, padding=3)
        self.convf2 = nn.Conv2d(dim, dim // 2, 3, padding=1)
        self.conv = nn.Conv2d(dim + dim // 2, dim - 2, 3, padding=1)
        self.out_dim = dim

    def forward(self, flow, corr):
        c = F.relu(self.convc1(corr))
        c = F.relu(self.convc2(c))
        f = F.relu(self.convf1(flow))
        f = F.relu(self.convf2(f))
        m = F.relu(self.conv(torch.cat([c, f], dim=1)))
        return torch.cat([m, flow], dim=1)


class SepConvGRU(nn.Module):
    """Separable (1x5 then 5x1) convolutional GRU."""

    def __init__(self, hidden_dim: int, input_dim: int):
        super().__init__()
        kw = dict(padding=(0, 2))
        self.convz1 = nn.Conv2d(hidden_dim + input_dim, hidden_dim, (1, 5), **kw)
        self.convr1 = nn.Conv2d(hidden_dim + input_dim, hidden_dim, (1, 5), **kw)
        self.convq1 = nn.Conv2d(hidden_dim + input_dim, hidden_dim, (1, 5), **kw)
        kh = dict(padding=(2, 0))
        self.convz2 = nn.Conv2d(hidden_dim + input_dim, hidden_dim, (5, 1), **kh)
        self.convr2 = nn.Conv2d(hidden_dim + input_dim, hidden_dim, (5, 1), **kh)
        self.convq2 = nn.Conv2d(hidden_dim + input_dim, hidden_dim, (5, 1), **kh)

    def _half(self, h, x, convz, convr, convq):
        hx = torch.cat([h, x], dim=1)
        z = torch.sigmoid(convz(hx))
        r = torch.sigmoid(convr(hx))
        q = torch.tanh(convq(torch.cat([r * h, x], dim=1)))
        return (1 - z) * h + z * q

    def forward(self, h, x):
        h = self._half(h, x, self.convz1, self.convr1, self.convq1)
        h = self._half(h, x, self.convz2, self.convr2, self.convq2)
        return h


class FlowHead(nn.Module):
    def __init__(self, hidden_dim: int):
        super().__init__()
        self.conv1 = nn.Conv2d(hidden_dim, 2 * hidden_dim, 3, padding=1)
        self.conv2 = nn.Conv2d(2 * hidden_dim, 2, 3, padding=1)

    def forward(self, x):
        return self.conv2(F.relu(self.conv1(x)))


class UpdateBlock(nn.Module):
    """One GRU refinement step: returns new hidden state, upsampling mask
    logits, and the flow increment."""

    def __init__(self, corr_planes: int, hidden_dim: int, context_dim: int):
        super().__init__()
        self.motion = MotionEncoder(corr_planes, hidden_dim)
        self.gru = SepConvGRU(hidden_dim, self.motion.out_dim + context_dim)
        self.flow_head = FlowHead(hidden_dim)
        self.mask_head = nn.Sequential(
            nn.Conv2d(hidden_dim, 2 * hidden_dim, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(2 * hidden_dim, DOWNSAMPLE * DOWNSAMPLE * 9, 1),
        )

    def forward(self, hidden, context, corr, flow):
        motion = self.motion(flow, corr)
        hidden = self.gru(hidden, torch.cat([motion, context], dim=1))
        delta = self.flow_head(hidden)
        mask = 0.25 * self.mask_head(hidden)
        return hidden, mask, delta


def convex_upsample(flow: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Lift 1/8-resolution flow to full resolution via learned convex combination.

    flow: [B, 2, H, W] in low-resolution cell units; mask: [B, 9*64, H, W]
    logits. Displacements are scaled by the resolution ratio, so a spatially
    constant flow stays exactly constant after upsampling.
    """
    b, _, h, w = flow.shape
    k = DOWNSAMPLE
    mask = mask.view(b, 1, 9, k, k, h, w)
    mask = torch.softmax(mask, dim=2)

    # Replicate-pad the neighborhood gather: convex combinations of equal
    # values then stay exactly equal, including at image borders.
    padded = F.pad(k * flow, (1, 1, 1, 1), mode="replicate")
    up = F.unfold(padded, (3, 3))
    up = up.view(b, 2, 9, 1, 1, h, w)
    up = torch.sum(mask * up, dim=2)  # [B, 2, k, k, H, W]
    up = up.permute(0, 1, 4, 2, 5, 3)
    return up.reshape(b, 2, k * h, k * w)
