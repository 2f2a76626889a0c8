"""Sample synthesis: transformed-SAR generation, crops, ground-truth flow,
and a procedural stand-in modality so the pipeline runs with no external data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from ..geometry import (
    AffineParams,
    FlowField,
    center_crop,
    flow_from_affine,
    invert_affine,
    recenter_affine,
    shift_affine_frame,
    warp_image,
)


@dataclass
class RegisteredPair:
    """Co-registered optical (HxWx3) and SAR (HxWx1) intensities in [0, 1]."""

    optical: np.ndarray
    sar: np.ndarray
    id: str

    def __post_init__(self) -> None:
        self.optical = np.asarray(self.optical, dtype=np.float64)
        self.sar = np.asarray(self.sar, dtype=np.float64)
        if self.optical.ndim != 3 or self.optical.shape[2] != 3:
            raise ValueError(f"optical must be HxWx3, got {self.optical.shape}")
        if self.sar.ndim != 3 or self.sar.shape[2] != 1:
            raise ValueError(f"sar must be HxWx1, got {self.sar.shape}")
        if self.optical.shape[:2] != self.sar.shape[:2]:
            raise ValueError("optical and sar dimensions differ")
        for name, arr in (("optical", self.optical), ("sar", self.sar)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.optical.shape[:2]


@dataclass
class TrainingSample:
    """One network input: optical crop, warped-SAR crop, and supervision."""

    optical_crop: np.ndarray  # c x c x 3
    sar_warped_crop: np.ndarray  # c x c x 1
    gt_flow: FlowField  # on the crop grid, optical -> warped SAR
    phi_gt: AffineParams  # in crop coordinates
    id: str = ""

    @property
    def valid(self) -> np.ndarray:
        return self.gt_flow.valid


def make_sample(pair: RegisteredPair, phi: AffineParams, crop: int) -> TrainingSample:
    """Warp the SAR image by the sampled transform and cut the centered crop.

    The transform's linear part pivots at the image center. The stored phi_gt
    is expressed in crop coordinates and regenerates gt_flow exactly; a crop
    pixel is valid iff its correspondence lands inside the cropped frame.
    """
    h, w = pair.shape
    if crop > min(h, w):
        raise ValueError(f"crop {crop} exceeds source size {h}x{w}")

    center = ((w - 1) / 2.0, (h - 1) / 2.0)
    phi_full = recenter_affine(phi, center)

    # T(q) = S(phi_full^-1 q): correspondences optical(p) <-> T(phi_full(p)).
    sar_warped, _ = warp_image(pair.sar, invert_affine(phi_full), border="zeros")

    offset = ((w - crop) // 2, (h - crop) // 2)  # (x, y)
    optical_crop = center_crop(pair.optical, crop)
    sar_crop = center_crop(sar_warped, crop)

    phi_gt = shift_affine_frame(phi_full, offset)
    gt = flow_from_affine(phi_gt, crop, crop)

    xs, ys = np.meshgrid(np.arange(crop, dtype=np.float64), np.arange(crop, dtype=np.float64))
    tx = xs + gt.data[..., 0]
    ty = ys + gt.data[..., 1]
    valid = (tx >= 0) & (tx <= crop - 1) & (ty >= 0) & (ty <= crop - 1)

    return TrainingSample(
        optical_crop=optical_crop,
        sar_warped_crop=sar_crop,
        gt_flow=FlowField(gt.data, valid),
        phi_gt=phi_gt,
        id=pair.id,
    )


def apply_speckle(image: np.ndarray, looks: float, rng: np.random.Generator) -> np.ndarray:
    """Multiplicative unit-mean gamma noise; variance of a constant patch is mean^2/looks."""
    noise = rng.gamma(shape=looks, scale=1.0 / looks, size=image.shape)
    return image * noise


def pseudo_modality(
    optical: np.ndarray,
    rng: np.random.Generator,
    looks: float = 4.0,
    gamma_range: tuple[float, float] = (0.5, 2.0),
    blob_count: tuple[int, int] = (2, 6),
    blob_radius: tuple[float, float] = (0.05, 0.2),
) -> np.ndarray:
    """Derive a SAR-like channel from an optical image.

    Grayscale reduction, a random gamma intensity remap, multiplicative
    speckle, then contrast inversion about the local mean inside a few random
    disks. Deterministic under the supplied generator; a zero image maps to a
    zero image. Set blob_count=(0, 0) to disable the inversion stage.
    """
    opt = np.asarray(optical, dtype=np.float64)
    if opt.ndim == 3:
        gray = 0.299 * opt[..., 0] + 0.587 * opt[..., 1] + 0.114 * opt[..., 2]
    else:
        gray = opt
    h, w = gray.shape

    gamma = rng.uniform(*gamma_range)
    remapped = np.clip(gray, 0.0, None) ** gamma
    out = apply_speckle(remapped, looks, rng)

    n_blobs = int(rng.integers(blob_count[0], blob_count[1] + 1))
    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    for _ in range(n_blobs):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        radius = rng.uniform(*blob_radius) * min(h, w)
        disk = (ys - cy) ** 2 + (xs - cx) ** 2 <= radius**2
        if disk.any():
            out[disk] = 2 * out[disk].mean() - out[disk]

    return np.clip(out, 0.0, 1.0)[..., None]


def _upsample_smooth(coarse: np.ndarray, h: int, w: int) -> np.ndarray:
    img = Image.fromarray(coarse.astype(np.float32), mode="F")
    return np.asarray(img.resize((w, h), Image.BICUBIC), dtype=np.float64)


def procedural_optical(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    """Synthetic optical scene: smooth color field plus boxes and disks."""
    channels = []
    shared = rng.uniform(size=(6, 6))
    for _ in range(3):
        coarse = 0.6 * shared + 0.4 * rng.uniform(size=(6, 6))
        channels.append(_upsample_smooth(coarse, h, w))
    img = np.stack(channels, axis=-1)

    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    for _ in range(int(rng.integers(6, 12))):
        color = rng.uniform(0.1, 0.9, size=3)
        if rng.uniform() < 0.5:
            y0, x0 = rng.integers(h), rng.integers(w)
            dy, dx = rng.integers(h // 8, h // 3), rng.integers(w // 8, w // 3)
            region = (ys >= y0) & (ys < y0 + dy) & (xs >= x0) & (xs < x0 + dx)
        else:
            cy, cx = rng.uniform(0, h), rng.uniform(0, w)
            r = rng.uniform(0.04, 0.18) * min(h, w)
            region = (ys - cy) ** 2 + (xs - cx) ** 2 <= r**2
        alpha = rng.uniform(0.5, 1.0)
        img[region] = (1 - alpha) * img[region] + alpha * color

    img += rng.normal(scale=0.01, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def procedural_pair(pair_id: str, h: int, w: int, rng: np.random.Generator) -> RegisteredPair:
    optical = procedural_optical(h, w, rng)
    sar = pseudo_modality(optical, rng)
    return RegisteredPair(optical=optical, sar=sar, id=pair_id)
