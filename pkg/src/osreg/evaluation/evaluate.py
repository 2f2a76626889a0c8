"""Model scoring over seeded test sets with mean +/- std reporting."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from ..geometry import FlowField
from ..geometry.lsr import flow_from_affine_tensor
from ..model.network import RegistrationNetwork
from ..pairgen.dataset import load_manifest, load_sample
from .metrics import MetricsRecord, aggregate, epe_pair, summarize


@dataclass
class EvalResult:
    records: list[MetricsRecord]
    summary: dict
    mode: str
    n_iters: int
    thresholds: list[float]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n_iters": self.n_iters,
            "thresholds": list(self.thresholds),
            "records": [r.to_dict() for r in self.records],
            "summary": {
                "n_sets": self.summary["n_sets"],
                "aepe": self.summary["aepe"],
                "rmse": self.summary["rmse"],
                "cmr_at": {str(t): v for t, v in self.summary["cmr_at"].items()},
                "aepe_at": {str(t): v for t, v in self.summary["aepe_at"].items()},
            },
        }


def predicted_flow_field(
    model: RegistrationNetwork,
    optical: torch.Tensor,
    sar: torch.Tensor,
    n_iters: int,
    mode: str,
) -> torch.Tensor:
    """Score-ready flow: affine-induced for ls/lsr, raw final flow for none."""
    out = model(optical, sar, n_iters=n_iters, mode=mode)
    if mode in ("ls", "lsr"):
        h, w = optical.shape[-2:]
        return flow_from_affine_tensor(out.phis[-1], h, w)
    return out.final_flow


def evaluate_manifest(
    model: RegistrationNetwork,
    manifest_path: Path,
    thresholds: list[float],
    n_iters: int,
    mode: str,
    device: str = "cpu",
    label: str | None = None,
) -> MetricsRecord:
    manifest_path = Path(manifest_path)
    _, records = load_manifest(manifest_path)
    root = manifest_path.parent

    model.eval()
    epes: list[float] = []
    with torch.no_grad():
        for rec in records:
            sample = load_sample(rec, root)
            optical = torch.tensor(
                np.moveaxis(sample.optical_crop, -1, 0), dtype=torch.float32, device=device
            ).unsqueeze(0)
            sar = torch.tensor(
                np.moveaxis(sample.sar_warped_crop, -1, 0), dtype=torch.float32, device=device
            ).unsqueeze(0)
            flow = predicted_flow_field(model, optical, sar, n_iters, mode)[0]
            pred = FlowField(
                np.moveaxis(flow.cpu().numpy().astype(np.float64), 0, -1),
                np.ones(sample.gt_flow.shape, dtype=bool),
            )
            epes.append(epe_pair(pred, sample.gt_flow))

    return aggregate(epes, thresholds, label=label or manifest_path.parent.name)


def evaluate_model(
    model: RegistrationNetwork,
    manifests: list[Path],
    thresholds: list[float],
    n_iters: int,
    mode: str,
    device: str = "cpu",
) -> EvalResult:
    """Score every manifest, then summarize across sets as mean +/- std.

    The manifests must be consistent: same crop size and sampling bounds.
    """
    if not manifests:
        raise ValueError("no test manifests supplied")
    headers = [load_manifest(Path(m))[0] for m in manifests]
    ref = {k: headers[0][k] for k in ("crop", "bounds")}
    for h, path in zip(headers[1:], manifests[1:]):
        if {k: h[k] for k in ("crop", "bounds")} != ref:
            raise ValueError(f"manifest {path} disagrees on crop/bounds with {manifests[0]}")

    records = [
        evaluate_manifest(model, m, thresholds, n_iters, mode, device=device, label=f"set{i}_seed{h['seed']}")
        for i, (m, h) in enumerate(zip(manifests, headers))
    ]
    return EvalResult(
        records=records,
        summary=summarize(records),
        mode=mode,
        n_iters=n_iters,
        thresholds=list(thresholds),
    )
