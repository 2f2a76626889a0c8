"""End-to-end registration of an image pair of arbitrary size.

Inputs larger than the tile size are processed as overlapping tiles whose
flows are averaged in the overlaps; one global least-squares fit then yields
the affine transform. This keeps the all-pairs correlation volume bounded
regardless of input size.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image, ImageDraw

from ..geometry import (
    AffineParams,
    FlowField,
    lsr_fit,
    warp_image,
    write_affine_text,
    write_flow,
)
from ..model.network import RegistrationNetwork, load_checkpoint
from ..pairgen.dataset import load_image_f64, save_image_u8


@dataclass
class RegistrationResult:
    phi: AffineParams
    flow: FlowField
    paths: dict[str, Path]


def _tile_starts(extent: int, tile: int, stride: int) -> list[int]:
    if extent <= tile:
        return [0]
    starts = list(range(0, extent - tile + 1, stride))
    if starts[-1] != extent - tile:
        starts.append(extent - tile)
    return starts


def predict_flow_tiled(
    model: RegistrationNetwork,
    optical: torch.Tensor,
    sar: torch.Tensor,
    n_iters: int,
    tile: int = 512,
    overlap: int = 128,
) -> torch.Tensor:
    """Dense flow for a [1, C, H, W] pair of any size; overlaps are averaged."""
    if overlap >= tile:
        raise ValueError("overlap must be smaller than the tile size")
    _, _, h, w = optical.shape
    if max(h, w) <= tile:
        return model(optical, sar, n_iters=n_iters, mode="none").final_flow

    stride = tile - overlap
    flow_sum = torch.zeros(1, 2, h, w)
    weight = torch.zeros(1, 1, h, w)
    for y0 in _tile_starts(h, tile, stride):
        for x0 in _tile_starts(w, tile, stride):
            y1, x1 = min(y0 + tile, h), min(x0 + tile, w)
            out = model(
                optical[..., y0:y1, x0:x1], sar[..., y0:y1, x0:x1], n_iters=n_iters, mode="none"
            )
            flow_sum[..., y0:y1, x0:x1] += out.final_flow
            weight[..., y0:y1, x0:x1] += 1.0
    return flow_sum / weight


def checkerboard(a: np.ndarray, b: np.ndarray, tile: int | None = None) -> np.ndarray:
    """Alternating square tiles from two aligned images of equal size."""
    if a.shape[:2] != b.shape[:2]:
        raise ValueError("checkerboard inputs must share spatial size")
    h, w = a.shape[:2]
    if tile is None:
        tile = max(1, min(h, w) // 8)
    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    take_a = ((ys // tile) + (xs // tile)) % 2 == 0
    a3 = _to_rgb(a)
    b3 = _to_rgb(b)
    return np.where(take_a[..., None], a3, b3)


def _to_rgb(img: np.ndarray) -> np.ndarray:
    if img.ndim == 2:
        return np.repeat(img[..., None], 3, axis=2)
    if img.shape[2] == 1:
        return np.repeat(img, 3, axis=2)
    return img


def corner_box_overlay(
    image: np.ndarray,
    phi_pred: AffineParams,
    phi_gt: AffineParams | None = None,
    inset: float = 0.25,
) -> np.ndarray:
    """Draw the transformed inner-box outline(s) over an image.

    The box is the image rectangle inset by `inset` on each side, mapped
    through the predicted transform (and the ground-truth one when given).
    """
    rgb = np.clip(_to_rgb(image), 0, 1)
    h, w = rgb.shape[:2]
    canvas = Image.fromarray(np.round(rgb * 255).astype(np.uint8))
    draw = ImageDraw.Draw(canvas)

    corners = np.array(
        [
            [inset * (w - 1), inset * (h - 1)],
            [(1 - inset) * (w - 1), inset * (h - 1)],
            [(1 - inset) * (w - 1), (1 - inset) * (h - 1)],
            [inset * (w - 1), (1 - inset) * (h - 1)],
        ]
    )

    def draw_box(phi: AffineParams, color: tuple[int, int, int]) -> None:
        pts = phi.apply(corners)
        poly = [tuple(p) for p in pts] + [tuple(pts[0])]
        draw.line(poly, fill=color, width=max(1, min(h, w) // 200))

    if phi_gt is not None:
        draw_box(phi_gt, (255, 220, 0))
    draw_box(phi_pred, (255, 64, 64))
    return np.asarray(canvas, dtype=np.float64) / 255.0


def register(
    optical_path: Path,
    sar_path: Path,
    checkpoint_path: Path,
    out_dir: Path,
    gt_phi: AffineParams | None = None,
    n_iters: int | None = None,
    tile: int = 512,
    overlap: int = 128,
    device: str = "cpu",
) -> RegistrationResult:
    """Estimate the affine registration of a pair and emit all artifacts:
    six-float affine file, dense flow, aligned SAR raster, checkerboard
    composite, and corner-box overlay."""
    model, payload = load_checkpoint(checkpoint_path, map_location=device)
    model.eval()
    if n_iters is None:
        n_iters = int(payload.get("extra", {}).get("loss_config", {}).get("n_iters_eval", 32))

    optical = load_image_f64(Path(optical_path), channels=3)
    sar = load_image_f64(Path(sar_path), channels=1)
    if optical.shape[:2] != sar.shape[:2]:
        raise ValueError(
            f"image sizes differ: optical {optical.shape[:2]} vs sar {sar.shape[:2]}"
        )

    opt_t = torch.tensor(np.moveaxis(optical, -1, 0), dtype=torch.float32, device=device).unsqueeze(0)
    sar_t = torch.tensor(np.moveaxis(sar, -1, 0), dtype=torch.float32, device=device).unsqueeze(0)

    with torch.no_grad():
        flow_t = predict_flow_tiled(model, opt_t, sar_t, n_iters=n_iters, tile=tile, overlap=overlap)

    h, w = optical.shape[:2]
    flow = FlowField(np.moveaxis(flow_t[0].cpu().numpy().astype(np.float64), 0, -1), np.ones((h, w), dtype=bool))
    phi = lsr_fit(flow)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    aligned, _ = warp_image(sar, phi)
    board = checkerboard(optical, aligned)
    overlay = corner_box_overlay(sar, phi, phi_gt=gt_phi)

    paths = {
        "affine": out_dir / "affine.txt",
        "flow": out_dir / "flow.gflw",
        "warped_sar": out_dir / "warped_sar.png",
        "checkerboard": out_dir / "checkerboard.png",
        "overlay": out_dir / "overlay.png",
    }
    write_affine_text(paths["affine"], phi)
    write_flow(paths["flow"], flow)
    save_image_u8(paths["warped_sar"], aligned)
    save_image_u8(paths["checkerboard"], board)
    save_image_u8(paths["overlay"], overlay)

    return RegistrationResult(phi=phi, flow=flow, paths=paths)
