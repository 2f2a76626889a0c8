"""Fixed sinusoidal position encoding and shifted-window attention fusion.

The fusion stack is attention-only in its default configuration: each level
applies one shared projection set symmetrically to both modality streams,
with queries drawn from the counterpart stream and keys/values from the
stream being refined. Window partitions alternate between aligned and
half-window-shifted across levels.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F


def positional_encoding_2d(
    h: int, w: int, dim: int, device=None, dtype=None, temperature: float = 10000.0
) -> torch.Tensor:
    """DETR-style fixed 2D sine embedding, shape [dim, h, w]. dim % 4 == 0."""
    if dim % 4 != 0:
        raise ValueError(f"embedding dim must be divisible by 4, got {dim}")
    half = dim // 2
    freq = torch.arange(half // 2, device=device, dtype=dtype or torch.float32)
    inv_freq = 1.0 / (temperature ** (2 * freq / half))

    ys = torch.arange(h, device=device, dtype=dtype or torch.float32)
    xs = torch.arange(w, device=device, dtype=dtype or torch.float32)

    def channelize(pos, n):  # pos [n], returns [half, n]
        ang = pos[None, :] * inv_freq[:, None]
        return torch.cat([torch.sin(ang), torch.cos(ang)], dim=0)

    emb_y = channelize(ys, h)[:, :, None].expand(half, h, w)
    emb_x = channelize(xs, w)[:, None, :].expand(half, h, w)
    return torch.cat([emb_y, emb_x], dim=0)


def add_positional_encoding(fmap: torch.Tensor) -> torch.Tensor:
    """Add the fixed embedding to a [B, C, H, W] feature map."""
    b, c, h, w = fmap.shape
    pe = positional_encoding_2d(h, w, c, device=fmap.device, dtype=fmap.dtype)
    return fmap + pe[None]


def window_partition(x: torch.Tensor, splits: int) -> torch.Tensor:
    """[B, C, H, W] -> [B*splits^2, C, H/splits, W/splits]; exact tiling required."""
    b, c, h, w = x.shape
    if h % splits or w % splits:
        raise ValueError(f"feature map {h}x{w} does not tile into {splits}x{splits} windows")
    hs, ws = h // splits, w // splits
    x = x.view(b, c, splits, hs, splits, ws)
    return x.permute(0, 2, 4, 1, 3, 5).reshape(b * splits * splits, c, hs, ws)


def window_merge(x: torch.Tensor, splits: int) -> torch.Tensor:
    """Inverse of window_partition."""
    bs, c, hs, ws = x.shape
    b = bs // (splits * splits)
    x = x.view(b, splits, splits, c, hs, ws)
    return x.permute(0, 3, 1, 4, 2, 5).reshape(b, c, splits * hs, splits * ws)


class CrossAttentionBlock(nn.Module):
    """One attention level: windowed softmax attention plus feed-forward,
    wrapped in a single residual branch.

    All linear layers are bias-free so that zeroing the value projection
    makes the whole block an exact identity. Queries come from `guide`,
    keys/values from `x`, and the output refines `x`.
    """

    def __init__(self, dim: int, heads: int = 1, ffn_expansion: int = 2):
        super().__init__()
        if dim % heads:
            raise ValueError("dim must be divisible by heads")
        self.dim = dim
        self.heads = heads
        self.norm_q = nn.LayerNorm(dim)
        self.norm_kv = nn.LayerNorm(dim)
        self.w_q = nn.Linear(dim, dim, bias=False)
        self.w_k = nn.Linear(dim, dim, bias=False)
        self.w_v = nn.Linear(dim, dim, bias=False)
        self.proj = nn.Linear(dim, dim, bias=False)
        self.ffn = nn.Sequential(
            nn.Linear(dim, ffn_expansion * dim, bias=False),
            nn.GELU(),
            nn.Linear(ffn_expansion * dim, dim, bias=False),
        )

    def _attend(self, q, k, v, collect: list | None):
        # q, k, v: [B', N, C]
        bp, n, c = q.shape
        hd = c // self.heads
        q = q.view(bp, n, self.heads, hd).transpose(1, 2)
        k = k.view(bp, n, self.heads, hd).transpose(1, 2)
        v = v.view(bp, n, self.heads, hd).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(hd), dim=-1)
        if collect is not None:
            collect.append(attn.detach())
        out = attn @ v
        return out.transpose(1, 2).reshape(bp, n, c)

    def forward(
        self,
        x: torch.Tensor,
        guide: torch.Tensor,
        splits: int,
        shift: bool,
        collect: list | None = None,
    ) -> torch.Tensor:
        b, c, h, w = x.shape
        sh, sw = (h // splits) // 2, (w // splits) // 2
        xs, gs = x, guide
        if shift:
            xs = torch.roll(xs, shifts=(-sh, -sw), dims=(2, 3))
            gs = torch.roll(gs, shifts=(-sh, -sw), dims=(2, 3))

        xw = window_partition(xs, splits)
        gw = window_partition(gs, splits)
        tokens_x = xw.flatten(2).transpose(1, 2)  # [B*, N, C]
        tokens_g = gw.flatten(2).transpose(1, 2)

        q = self.w_q(self.norm_q(tokens_g))
        kv = self.norm_kv(tokens_x)
        k = self.w_k(kv)
        v = self.w_v(kv)

        message = self._attend(q, k, v, collect)
        message = self.ffn(self.proj(message))

        message = message.transpose(1, 2).reshape(xw.shape)
        message = window_merge(message, splits)
        if shift:
            message = torch.roll(message, shifts=(sh, sw), dims=(2, 3))
        return x + message


class AttentionFusion(nn.Module):
    """Stack of self- then cross-attention levels applied to two streams.

    One block per level, shared across both directions. Even levels use the
    aligned window partition, odd levels shift by half a window.
    """

    def __init__(
        self,
        dim: int,
        self_attn_levels: int = 0,
        cross_attn_levels: int = 2,
        heads: int = 1,
        ffn_expansion: int = 2,
        window_splits: int = 2,
    ):
        super().__init__()
        self.kinds = ["self"] * self_attn_levels + ["cross"] * cross_attn_levels
        self.blocks = nn.ModuleList(
            CrossAttentionBlock(dim, heads, ffn_expansion) for _ in self.kinds
        )
        self.window_splits = window_splits

    def forward(
        self, f_a: torch.Tensor, f_b: torch.Tensor, export: dict | None = None
    ) -> tuple[torch.Tensor, torch.Tensor]:
        for i, (kind, block) in enumerate(zip(self.kinds, self.blocks)):
            shift = i % 2 == 1
            col_a = [] if export is not None else None
            col_b = [] if export is not None else None
            if kind == "cross":
                new_a = block(f_a, f_b, self.window_splits, shift, col_a)
                new_b = block(f_b, f_a, self.window_splits, shift, col_b)
                f_a, f_b = new_a, new_b
            else:
                f_a = block(f_a, f_a, self.window_splits, shift, col_a)
                f_b = block(f_b, f_b, self.window_splits, shift, col_b)
            if export is not None:
                export[f"level{i}_{kind}_a"] = col_a[0]
                export[f"level{i}_{kind}_b"] = col_b[0]
        return f_a, f_b
