"""Weight-shared residual feature encoder with 8x spatial downsampling."""

from __future__ import annotations

import torch
import torch.nn as nn


class ResidualBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.norm1 = nn.InstanceNorm2d(out_ch)
        self.norm2 = nn.InstanceNorm2d(out_ch)
        self.relu = nn.ReLU(inplace=True)
        if stride != 1 or in_ch != out_ch:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride), nn.InstanceNorm2d(out_ch)
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        y = self.relu(self.norm1(self.conv1(x)))
        y = self.norm2(self.conv2(y))
        return self.relu(y + self.shortcut(x))


class ConvEncoder(nn.Module):
    """Stem + three stride-2 residual stages + 1x1 projection head."""

    def __init__(self, widths: tuple[int, int, int], out_dim: int, in_channels: int = 3):
        super().__init__()
        w1, w2, w3 = widths
        self.stem = nn.Sequential(
            nn.Conv2d(in_channels, w1, 7, padding=3),
            nn.InstanceNorm2d(w1),
            nn.ReLU(inplace=True),
        )
        self.stage1 = nn.Sequential(ResidualBlock(w1, w1, stride=2), ResidualBlock(w1, w1))
        self.stage2 = nn.Sequential(ResidualBlock(w1, w2, stride=2), ResidualBlock(w2, w2))
        self.stage3 = nn.Sequential(ResidualBlock(w2, w3, stride=2), ResidualBlock(w3, w3))
        self.head = nn.Conv2d(w3, out_dim, 1)

    def forward(self, x):
        x = self.stem(x)
        x = self.stage1(x)
        x = self.stage2(x)
        x = self.stage3(x)
        return self.head(x)

    def load_pretrained(self, state_dict: dict) -> int:
        """Optional partial initialization from an external classifier encoder.

        Copies every entry whose key and shape match; returns how many were used.
        """
        own = self.state_dict()
        matched = {
            k: torch.as_tensor(v)
            for k, v in state_dict.items()
            if k in own and own[k].shape == tuple(torch.as_tensor(v).shape)
        }
        own.update(matched)
        self.load_state_dict(own)
        return len(matched)
