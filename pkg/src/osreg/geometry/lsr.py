"""Closed-form least-squares fit of an affine transform to a dense flow field.

The fit minimizes ||F - X (Phi - I)^T||^2 over all selected pixels, where X
stacks homogeneous pixel coordinates [x, y, 1]. Coordinates are centered and
scaled to unit RMS radius before forming the normal equations, which keeps
the 3x3 solve well conditioned at any image size without changing the
minimizer; the solution is mapped back to raw pixel coordinates afterwards.
Both a numpy entry point (for data tooling) and a batched, differentiable
torch entry point (for the network head and losses) are provided.
"""

from __future__ import annotations

import numpy as np
import torch

from .affine import AffineParams
from .flow import FlowField

# Relative floor on the smaller eigenvalue of the coordinate covariance;
# below it the support is collinear and the 6-parameter fit is rank deficient.
_COLLINEAR_RTOL = 1e-10


class DegenerateSupportError(ValueError):
    """Fewer than 3 selected pixels, or all selected pixels collinear."""


def lsr_fit(flow: FlowField | np.ndarray, mask: np.ndarray | None = None) -> AffineParams:
    """Fit the affine transform whose induced flow is closest to `flow`.

    Pixels participate when they are valid (for a FlowField input) and, if
    given, selected by `mask`. Raises DegenerateSupportError when fewer than
    3 pixels remain or the support is collinear.
    """
    if isinstance(flow, FlowField):
        data = flow.data
        selected = flow.valid.copy()
    else:
        data = np.asarray(flow, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 2:
            raise ValueError(f"flow must be HxWx2, got {data.shape}")
        selected = np.ones(data.shape[:2], dtype=bool)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != selected.shape:
            raise ValueError(f"mask shape {mask.shape} does not match flow {selected.shape}")
        selected &= mask

    ys, xs = np.nonzero(selected)
    n = xs.size
    if n < 3:
        raise DegenerateSupportError(f"need at least 3 selected pixels, got {n}")

    x = xs.astype(np.float64)
    y = ys.astype(np.float64)
    cx, cy = x.mean(), y.mean()
    xc, yc = x - cx, y - cy

    cov = np.array([[np.mean(xc * xc), np.mean(xc * yc)], [np.mean(xc * yc), np.mean(yc * yc)]])
    eigs = np.linalg.eigvalsh(cov)
    if eigs[0] <= _COLLINEAR_RTOL * max(eigs[1], 1.0):
        raise DegenerateSupportError("selected pixels are collinear")

    scale = np.sqrt(np.mean(xc * xc + yc * yc))
    xn, yn = xc / scale, yc / scale

    basis = np.stack([xn, yn, np.ones(n)], axis=1)
    rhs = data[selected]
    gram = basis.T @ basis
    moments = basis.T @ rhs
    delta_n = np.linalg.solve(gram, moments).T  # 2x3, normalized coordinates

    # Undo the normalization: [xn, yn, 1]^T = T [x, y, 1]^T.
    t_norm = np.array(
        [[1 / scale, 0.0, -cx / scale], [0.0, 1 / scale, -cy / scale], [0.0, 0.0, 1.0]]
    )
    delta = delta_n @ t_norm
    return AffineParams(delta + AffineParams.identity().mu)


def lsr_fit_tensor(
    flow: torch.Tensor,
    valid: torch.Tensor | None = None,
    origin: tuple[float, float] = (0.0, 0.0),
    step: float = 1.0,
) -> torch.Tensor:
    """Differentiable batched affine fit.

    flow: [B, 2, H, W] (or [2, H, W]) with channels (flow_x, flow_y); valid:
    optional [B, H, W] (or [H, W]) mask. Pixel (i, j) of the grid sits at
    coordinate (origin_x + step*j, origin_y + step*i), which lets callers fit
    on subsampled grids in full-resolution units. Returns [B, 2, 3] (or
    [2, 3]) affine matrices; gradients propagate into `flow`.
    """
    squeeze = flow.dim() == 3
    if squeeze:
        flow = flow.unsqueeze(0)
        if valid is not None:
            valid = valid.unsqueeze(0)
    if flow.dim() != 4 or flow.shape[1] != 2:
        raise ValueError(f"flow must be [B, 2, H, W], got {tuple(flow.shape)}")
    b, _, h, w = flow.shape
    dtype, device = flow.dtype, flow.device

    ys = torch.arange(h, dtype=dtype, device=device) * step + origin[1]
    xs = torch.arange(w, dtype=dtype, device=device) * step + origin[0]
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")
    gx = gx.expand(b, h, w)
    gy = gy.expand(b, h, w)

    if valid is None:
        wgt = torch.ones(b, h, w, dtype=dtype, device=device)
    else:
        wgt = valid.to(dtype)
    n = wgt.sum(dim=(1, 2))
    if torch.any(n < 3):
        raise DegenerateSupportError("need at least 3 selected pixels in every batch item")

    cx = (wgt * gx).sum(dim=(1, 2)) / n
    cy = (wgt * gy).sum(dim=(1, 2)) / n
    xc = gx - cx.view(b, 1, 1)
    yc = gy - cy.view(b, 1, 1)

    sxx = (wgt * xc * xc).sum(dim=(1, 2)) / n
    syy = (wgt * yc * yc).sum(dim=(1, 2)) / n
    sxy = (wgt * xc * yc).sum(dim=(1, 2)) / n
    # Smaller covariance eigenvalue; collinear support makes it vanish.
    half_tr = 0.5 * (sxx + syy)
    disc = torch.sqrt(torch.clamp((0.5 * (sxx - syy)) ** 2 + sxy**2, min=0.0))
    if torch.any(half_tr - disc <= _COLLINEAR_RTOL * torch.clamp(half_tr + disc, min=1.0)):
        raise DegenerateSupportError("selected pixels are collinear")

    scale = torch.sqrt(sxx + syy)
    xn = xc / scale.view(b, 1, 1)
    yn = yc / scale.view(b, 1, 1)

    def moments(p: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
        return (wgt * p * q).sum(dim=(1, 2))

    one = torch.ones_like(gx)
    gram = torch.stack(
        [
            torch.stack([moments(xn, xn), moments(xn, yn), moments(xn, one)], dim=-1),
            torch.stack([moments(yn, xn), moments(yn, yn), moments(yn, one)], dim=-1),
            torch.stack([moments(one, xn), moments(one, yn), n], dim=-1),
        ],
        dim=-2,
    )  # [B, 3, 3]
    fx, fy = flow[:, 0], flow[:, 1]
    rhs = torch.stack(
        [
            torch.stack([moments(xn, fx), moments(yn, fx), moments(one, fx)], dim=-1),
            torch.stack([moments(xn, fy), moments(yn, fy), moments(one, fy)], dim=-1),
        ],
        dim=-1,
    )  # [B, 3, 2]

    delta_n = torch.linalg.solve(gram, rhs).transpose(1, 2)  # [B, 2, 3]

    inv_s = 1.0 / scale
    zeros = torch.zeros_like(scale)
    ones = torch.ones_like(scale)
    t_norm = torch.stack(
        [
            torch.stack([inv_s, zeros, -cx * inv_s], dim=-1),
            torch.stack([zeros, inv_s, -cy * inv_s], dim=-1),
            torch.stack([zeros, zeros, ones], dim=-1),
        ],
        dim=-2,
    )  # [B, 3, 3]
    delta = torch.bmm(delta_n, t_norm)

    eye = torch.tensor([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], dtype=dtype, device=device)
    phi = delta + eye
    return phi.squeeze(0) if squeeze else phi


def flow_from_affine_tensor(phi: torch.Tensor, h: int, w: int) -> torch.Tensor:
    """Affine-induced flow as a [B, 2, H, W] tensor (or [2, H, W] for a single phi)."""
    squeeze = phi.dim() == 2
    if squeeze:
        phi = phi.unsqueeze(0)
    if phi.shape[-2:] != (2, 3):
        raise ValueError(f"phi must be [B, 2, 3], got {tuple(phi.shape)}")
    b = phi.shape[0]
    dtype, device = phi.dtype, phi.device

    ys = torch.arange(h, dtype=dtype, device=device)
    xs = torch.arange(w, dtype=dtype, device=device)
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")
    coords = torch.stack([gx, gy, torch.ones_like(gx)], dim=0).reshape(3, h * w)

    eye = torch.tensor([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], dtype=dtype, device=device)
    delta = phi - eye
    flow = torch.matmul(delta, coords).reshape(b, 2, h, w)
    return flow.squeeze(0) if squeeze else flow
