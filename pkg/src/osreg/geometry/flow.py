"""Dense flow fields, pixel grids, affine-induced flow, and image warping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affine import AffineParams


@dataclass
class FlowField:
    """Per-pixel displacement field.

    data holds (flow_x, flow_y) in pixels on the last axis; valid marks pixels
    whose correspondence is trustworthy. A pixel (x, y) in the source image
    corresponds to (x + flow_x, y + flow_y) in the target image.
    """

    data: np.ndarray  # H x W x 2, float
    valid: np.ndarray  # H x W, bool

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.data.ndim != 3 or self.data.shape[2] != 2:
            raise ValueError(f"flow data must be HxWx2, got {self.data.shape}")
        if self.valid.shape != self.data.shape[:2]:
            raise ValueError(
                f"valid mask shape {self.valid.shape} does not match flow {self.data.shape[:2]}"
            )
        if not np.all(np.isfinite(self.data[self.valid])):
            raise ValueError("flow contains non-finite values on valid pixels")

    @classmethod
    def zeros(cls, h: int, w: int) -> "FlowField":
        return cls(np.zeros((h, w, 2)), np.ones((h, w), dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.data**2, axis=2))


@dataclass(frozen=True)
class PixelGrid:
    """Homogeneous pixel-center coordinates, one row [x, y, 1] per pixel, row-major."""

    coords: np.ndarray  # N x 3

    def __post_init__(self) -> None:
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 3:
            raise ValueError(f"pixel grid must be Nx3, got {coords.shape}")
        if not np.all(coords[:, 2] == 1.0):
            raise ValueError("third pixel-grid column must be identically 1")
        object.__setattr__(self, "coords", coords)


def pixel_grid(h: int, w: int) -> PixelGrid:
    """Full h*w lattice of homogeneous coordinates, row-major (x varies fastest)."""
    if h < 1 or w < 1:
        raise ValueError(f"grid dimensions must be >= 1, got {h}x{w}")
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    ones = np.ones_like(xs)
    return PixelGrid(np.stack([xs, ys, ones], axis=-1).reshape(-1, 3))


def flow_from_affine(phi: AffineParams, h: int, w: int) -> FlowField:
    """Displacement field induced by an affine map: flow(p) = (M - I) p + t."""
    grid = pixel_grid(h, w)
    delta = phi.mu - AffineParams.identity().mu
    flow = grid.coords @ delta.T
    return FlowField(flow.reshape(h, w, 2), np.ones((h, w), dtype=bool))


def _bilinear_sample(image: np.ndarray, x: np.ndarray, y: np.ndarray, border: str) -> tuple[np.ndarray, np.ndarray]:
    """Sample image (HxWxC) at float coordinates; returns (values, in_bounds)."""
    h, w = image.shape[:2]
    inside = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)

    if border == "replicate":
        xs = np.clip(x, 0, w - 1)
        ys = np.clip(y, 0, h - 1)
    elif border == "zeros":
        xs, ys = x, y
    else:
        raise ValueError(f"unknown border mode {border!r}")

    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = x0 + 1
    y1 = y0 + 1
    wx = xs - x0
    wy = ys - y0

    def gather(yi, xi):
        ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        vals = image[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
        if border == "zeros":
            vals = vals * ok[..., None]
        return vals

    v00 = gather(y0, x0)
    v01 = gather(y0, x1)
    v10 = gather(y1, x0)
    v11 = gather(y1, x1)
    top = v00 * (1 - wx)[..., None] + v01 * wx[..., None]
    bot = v10 * (1 - wx)[..., None] + v11 * wx[..., None]
    out = top * (1 - wy)[..., None] + bot * wy[..., None]
    return out, inside


def warp_image(
    image: np.ndarray,
    phi_or_flow: AffineParams | FlowField,
    border: str = "zeros",
) -> tuple[np.ndarray, np.ndarray]:
    """Resample an image at affine- or flow-mapped coordinates.

    Output pixel p takes the bilinear sample of `image` at the mapped
    coordinate (phi(p), or p + flow(p)). Returns (warped HxWxC, valid HxW);
    valid is False where the source coordinate falls outside the image.
    """
    img = np.asarray(image, dtype=np.float64)
    if not np.all(np.isfinite(img)):
        raise ValueError("image must be finite")
    squeeze = img.ndim == 2
    if squeeze:
        img = img[..., None]
    h, w = img.shape[:2]

    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    if isinstance(phi_or_flow, AffineParams):
        pts = phi_or_flow.apply(np.stack([xs, ys], axis=-1))
        tx, ty = pts[..., 0], pts[..., 1]
        extra_valid = np.ones((h, w), dtype=bool)
    elif isinstance(phi_or_flow, FlowField):
        if phi_or_flow.shape != (h, w):
            raise ValueError(
                f"flow shape {phi_or_flow.shape} does not match image {(h, w)}"
            )
        tx = xs + phi_or_flow.data[..., 0]
        ty = ys + phi_or_flow.data[..., 1]
        extra_valid = phi_or_flow.valid
    else:
        raise TypeError(f"expected AffineParams or FlowField, got {type(phi_or_flow)}")

    warped, inside = _bilinear_sample(img, tx, ty, border)
    if squeeze:
        warped = warped[..., 0]
    return warped, inside & extra_valid


def center_crop(array: np.ndarray, crop: int) -> np.ndarray:
    """Center crop of the leading two (row, col) axes."""
    h, w = array.shape[:2]
    if crop > min(h, w):
        raise ValueError(f"crop {crop} exceeds image size {h}x{w}")
    top = (h - crop) // 2
    left = (w - crop) // 2
    return array[top : top + crop, left : left + crop]
