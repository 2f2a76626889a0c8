"""Dataset construction and persistence: seeded manifests, rasters, flows."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..geometry import AffineParams, read_flow, write_flow
from .bounds import TransformBounds, sample_affine
from .synthesis import RegisteredPair, TrainingSample, make_sample

MANIFEST_NAME = "manifest.jsonl"


def sample_rng(seed: int, sample_id: str) -> np.random.Generator:
    """Per-sample stream derived from (seed, id); parallel builds match serial ones."""
    digest = hashlib.sha256(f"{seed}:{sample_id}".encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([seed, *words]))


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_image_u8(path: Path, array: np.ndarray) -> None:
    """Store a float [0,1] image as an 8-bit PNG (grayscale for 1 channel)."""
    arr = np.clip(np.asarray(array), 0.0, 1.0)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    data = np.round(arr * 255).astype(np.uint8)
    Image.fromarray(data).save(path, format="PNG")


def load_image_f64(path: Path, channels: int) -> np.ndarray:
    img = Image.open(path)
    arr = np.asarray(img, dtype=np.float64) / 255.0
    if channels == 1:
        if arr.ndim == 3:
            arr = 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
        return arr[..., None]
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    return arr[..., :3]


@dataclass
class SampleRecord:
    id: str
    split: str
    seed: int
    phi: list[float]
    crop: int
    optical_path: str
    sar_path: str
    flow_path: str
    digests: dict[str, str]

    def phi_params(self) -> AffineParams:
        return AffineParams(np.array(self.phi).reshape(2, 3))


def build_dataset(
    pairs: list[RegisteredPair],
    bounds: TransformBounds,
    split: str,
    seed: int,
    out: Path,
    crop: int,
) -> Path:
    """Materialize one sample per pair under `out`; returns the manifest path.

    The manifest is deterministic: identical (pairs, bounds, seed) produce
    byte-identical files. Raises on duplicate pair ids.
    """
    if not pairs:
        raise ValueError("pair list is empty")
    ids = [p.id for p in pairs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate pair ids in dataset")

    out = Path(out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "flows").mkdir(parents=True, exist_ok=True)

    header = {
        "kind": "dataset_header",
        "split": split,
        "seed": seed,
        "crop": crop,
        "count": len(pairs),
        "bounds": asdict(bounds),
    }
    records = []
    for pair in pairs:
        rng = sample_rng(seed, pair.id)
        phi = sample_affine(bounds, rng)
        sample = make_sample(pair, phi, crop)

        opt_path = out / "images" / f"{pair.id}_opt.png"
        sar_path = out / "images" / f"{pair.id}_sar.png"
        flow_path = out / "flows" / f"{pair.id}.gflw"
        save_image_u8(opt_path, sample.optical_crop)
        save_image_u8(sar_path, sample.sar_warped_crop)
        write_flow(flow_path, sample.gt_flow)

        records.append(
            SampleRecord(
                id=pair.id,
                split=split,
                seed=seed,
                phi=[float(v) for v in sample.phi_gt.mu.ravel()],
                crop=crop,
                optical_path=str(opt_path.relative_to(out)),
                sar_path=str(sar_path.relative_to(out)),
                flow_path=str(flow_path.relative_to(out)),
                digests={
                    "optical": file_digest(opt_path),
                    "sar": file_digest(sar_path),
                    "flow": file_digest(flow_path),
                },
            )
        )

    manifest = out / MANIFEST_NAME
    with open(manifest, "w") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in records:
            f.write(json.dumps(asdict(rec), sort_keys=True) + "\n")
    return manifest


def load_manifest(manifest_path: Path) -> tuple[dict, list[SampleRecord]]:
    manifest_path = Path(manifest_path)
    with open(manifest_path) as f:
        lines = [json.loads(line) for line in f if line.strip()]
    if not lines or lines[0].get("kind") != "dataset_header":
        raise ValueError(f"{manifest_path} is not a dataset manifest")
    header = lines[0]
    records = [SampleRecord(**rec) for rec in lines[1:]]
    if len(records) != header["count"]:
        raise ValueError(
            f"manifest count {header['count']} != {len(records)} records"
        )
    return header, records


def load_sample(record: SampleRecord, root: Path) -> TrainingSample:
    root = Path(root)
    optical = load_image_f64(root / record.optical_path, channels=3)
    sar = load_image_f64(root / record.sar_path, channels=1)
    flow = read_flow(root / record.flow_path)
    return TrainingSample(
        optical_crop=optical,
        sar_warped_crop=sar,
        gt_flow=flow,
        phi_gt=record.phi_params(),
        id=record.id,
    )
