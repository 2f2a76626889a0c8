"""Optimization loop: AdamW with one-cycle schedule, JSONL logging, periodic
validation, and best/latest checkpointing."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset

from ..geometry.lsr import flow_from_affine_tensor
from ..model.network import RegistrationNetwork, save_checkpoint
from ..pairgen.dataset import load_manifest, load_sample
from .losses import LossConfig, geometric_loss, sequence_loss, total_loss


@dataclass
class TrainConfig:
    learning_rate: float = 1.2e-5
    batch_size: int = 12
    max_steps: int = 120_000
    grad_clip: float = 1.0
    weight_decay: float = 1e-4
    seed: int = 0
    val_interval_fraction: float = 0.02
    warmup_fraction: float = 0.05
    num_workers: int = 0
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size < 1:
            raise ValueError("learning_rate must be positive and batch_size >= 1")
        if self.max_steps < 0:
            raise ValueError("max_steps cannot be negative")
        if not 0 < self.val_interval_fraction <= 1:
            raise ValueError("val_interval_fraction must lie in (0, 1]")
        if not 0 < self.warmup_fraction < 1:
            raise ValueError("warmup_fraction must lie in (0, 1)")


class SampleDataset(Dataset):
    """Materialized dataset view: tensors ready for the network."""

    def __init__(self, manifest_path: Path):
        self.root = Path(manifest_path).parent
        self.header, self.records = load_manifest(manifest_path)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, idx: int) -> dict:
        sample = load_sample(self.records[idx], self.root)
        return {
            "optical": torch.tensor(np.moveaxis(sample.optical_crop, -1, 0), dtype=torch.float32),
            "sar": torch.tensor(np.moveaxis(sample.sar_warped_crop, -1, 0), dtype=torch.float32),
            "flow": torch.tensor(np.moveaxis(sample.gt_flow.data, -1, 0), dtype=torch.float32),
            "valid": torch.tensor(sample.gt_flow.valid),
            "phi": torch.tensor(sample.phi_gt.mu, dtype=torch.float32),
        }


@dataclass
class TrainResult:
    latest_path: Path
    best_path: Path
    log_path: Path
    best_val_aepe: float
    history: list[dict] = field(default_factory=list)


def _epe_mean(flow: torch.Tensor, gt: torch.Tensor, valid: torch.Tensor) -> float:
    err = torch.sqrt(((flow - gt) ** 2).sum(dim=1))
    return float((err * valid).sum() / valid.sum().clamp(min=1))


def validate_aepe(
    model: RegistrationNetwork,
    loader: DataLoader,
    n_iters: int,
    mode: str,
    device: str = "cpu",
) -> float:
    """Mean per-pair endpoint error on a validation loader.

    Scores the mode-consistent output: the affine-induced flow in ls/lsr
    modes, the raw final flow otherwise.
    """
    model.eval()
    epes: list[float] = []
    with torch.no_grad():
        for batch in loader:
            optical = batch["optical"].to(device)
            sar = batch["sar"].to(device)
            out = model(optical, sar, n_iters=n_iters, mode=mode)
            if mode in ("ls", "lsr"):
                h, w = optical.shape[-2:]
                flow = flow_from_affine_tensor(out.phis[-1], h, w)
            else:
                flow = out.final_flow
            for i in range(optical.shape[0]):
                epes.append(
                    _epe_mean(flow[i : i + 1], batch["flow"][i : i + 1], batch["valid"][i : i + 1])
                )
    model.train()
    return float(np.mean(epes))


def _infinite_batches(loader: DataLoader):
    while True:
        yield from loader


def train(
    model: RegistrationNetwork,
    train_data: SampleDataset,
    val_data: SampleDataset | None,
    loss_cfg: LossConfig,
    train_cfg: TrainConfig,
    out_dir: Path,
    mode: str = "lsr",
) -> TrainResult:
    """Optimize the combined loss; aborts on non-finite loss values.

    Writes a JSONL log (step, l_seq, l_geo, total, lr, val_aepe) plus
    `latest.ckpt` every validation and `best.ckpt` at the lowest validation
    AEPE. Deterministic under (data, seed) up to float reduction order.
    """
    if len(train_data) == 0:
        raise ValueError("training dataset is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    device = train_cfg.device

    torch.manual_seed(train_cfg.seed)
    generator = torch.Generator().manual_seed(train_cfg.seed)
    loader = DataLoader(
        train_data,
        batch_size=train_cfg.batch_size,
        shuffle=True,
        num_workers=train_cfg.num_workers,
        generator=generator,
        drop_last=len(train_data) > train_cfg.batch_size,
    )
    val_loader = (
        DataLoader(val_data, batch_size=train_cfg.batch_size, shuffle=False)
        if val_data is not None and len(val_data) > 0
        else None
    )

    model.to(device)
    model.train()
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=train_cfg.learning_rate, weight_decay=train_cfg.weight_decay
    )
    scheduler = None
    if train_cfg.max_steps > 0:
        scheduler = torch.optim.lr_scheduler.OneCycleLR(
            optimizer,
            max_lr=train_cfg.learning_rate,
            total_steps=train_cfg.max_steps,
            pct_start=train_cfg.warmup_fraction,
            anneal_strategy="linear",
        )

    latest_path = out_dir / "latest.ckpt"
    best_path = out_dir / "best.ckpt"
    log_path = out_dir / "train_log.jsonl"
    extra = {"loss_config": asdict(loss_cfg), "train_config": asdict(train_cfg), "mode": mode}

    val_every = max(1, round(train_cfg.val_interval_fraction * max(train_cfg.max_steps, 1)))
    best_val = math.inf
    history: list[dict] = []

    def run_validation(step: int) -> float | None:
        nonlocal best_val
        if val_loader is None:
            save_checkpoint(latest_path, model, step=step, extra=extra)
            return None
        aepe = validate_aepe(model, val_loader, loss_cfg.n_iters_train, mode, device)
        save_checkpoint(latest_path, model, step=step, extra=extra)
        if aepe < best_val:
            best_val = aepe
            save_checkpoint(best_path, model, step=step, extra=extra)
        return aepe

    with open(log_path, "w") as log:
        if train_cfg.max_steps == 0:
            save_checkpoint(latest_path, model, step=0, extra=extra)
            save_checkpoint(best_path, model, step=0, extra=extra)
            return TrainResult(latest_path, best_path, log_path, math.inf, history)

        batches = _infinite_batches(loader)
        for step in range(1, train_cfg.max_steps + 1):
            batch = next(batches)
            optical = batch["optical"].to(device)
            sar = batch["sar"].to(device)
            gt = batch["flow"].to(device)
            valid = batch["valid"].to(device)

            out = model(optical, sar, n_iters=loss_cfg.n_iters_train, mode=mode)
            l_seq = sequence_loss(out.flows, gt, valid, loss_cfg.omega)
            if mode == "none":
                l_geo = torch.zeros((), device=device)
            else:
                l_geo = geometric_loss(out.phis, gt, valid, loss_cfg.omega)
            loss = total_loss(l_seq, l_geo, loss_cfg.lambda_seq, loss_cfg.lambda_geo)

            if not torch.isfinite(loss):
                raise RuntimeError(f"non-finite loss at step {step}: {float(loss.detach())}")

            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), train_cfg.grad_clip)
            optimizer.step()
            if scheduler is not None:
                scheduler.step()

            val_aepe = run_validation(step) if (step % val_every == 0 or step == train_cfg.max_steps) else None
            record = {
                "step": step,
                "l_seq": float(l_seq.detach()),
                "l_geo": float(l_geo.detach()),
                "total": float(loss.detach()),
                "lr": optimizer.param_groups[0]["lr"],
                "val_aepe": val_aepe,
            }
            history.append(record)
            log.write(json.dumps(record) + "\n")

    if not best_path.exists():
        save_checkpoint(best_path, model, step=train_cfg.max_steps, extra=extra)
    return TrainResult(latest_path, best_path, log_path, best_val, history)
