"""One-off calibration of the toy end-to-end run (mirrors the acceptance suite)."""

import json
import time
from pathlib import Path

import numpy as np
import torch

from osreg.configio import toy_profile
from osreg.configio import build_dataclass
from osreg.evaluation import evaluate_model, register
from osreg.geometry import AffineParams
from osreg.model import ModelConfig, RegistrationNetwork
from osreg.pairgen import TOY_BOUNDS, build_dataset, procedural_pair, save_image_u8
from osreg.training import LossConfig, SampleDataset, TrainConfig, train

ROOT = Path("/root/calib")
ROOT.mkdir(exist_ok=True)
t_start = time.time()

cfg = toy_profile()
rng = np.random.default_rng(np.random.SeedSequence([0, 128]))
pairs = [procedural_pair(f"pair{i:04d}", 128, 128, rng) for i in range(200)]
train_pairs, val_pairs, test_pairs = pairs[:160], pairs[160:180], pairs[180:]

tm = build_dataset(train_pairs, TOY_BOUNDS, "train", seed=100, out=ROOT / "train", crop=96)
vm = build_dataset(val_pairs, TOY_BOUNDS, "val", seed=101, out=ROOT / "val", crop=96)
test_manifests = [
    build_dataset(test_pairs, TOY_BOUNDS, "test", seed=s, out=ROOT / f"test{s}", crop=96)
    for s in (1, 2, 3)
]
print(f"[{time.time()-t_start:.0f}s] datasets built", flush=True)

model_cfg = build_dataclass(ModelConfig, cfg["model"], "model")
loss_cfg = build_dataclass(LossConfig, cfg["loss"], "loss")
train_cfg = build_dataclass(TrainConfig, cfg["training"], "training")
torch.manual_seed(0)
model = RegistrationNetwork(model_cfg)
result = train(model, SampleDataset(tm), SampleDataset(vm), loss_cfg, train_cfg, ROOT / "run", mode="lsr")
print(f"[{time.time()-t_start:.0f}s] training done, best val {result.best_val_aepe:.4f}", flush=True)
vals = [r["val_aepe"] for r in result.history if r["val_aepe"] is not None]
print("val trajectory:", [round(v, 3) for v in vals], flush=True)

for mode in ("lsr", "none", "ls"):
    t0 = time.time()
    ev = evaluate_model(model, test_manifests, [1.0, 2.0, 5.0], loss_cfg.n_iters_eval, mode)
    s = ev.summary
    print(
        f"mode {mode}: AEPE {s['aepe'][0]:.4f}±{s['aepe'][1]:.4f} RMSE {s['rmse'][0]:.4f}"
        f" CMR@2 {s['cmr_at'][2.0][0]:.2f}% ({time.time()-t0:.0f}s)",
        flush=True,
    )

# Self-pair identity registration with the trained checkpoint.
self_img = test_pairs[0].optical
save_image_u8(ROOT / "self_opt.png", self_img)
save_image_u8(ROOT / "self_sar.png", self_img.mean(axis=2, keepdims=True))
t0 = time.time()
reg = register(ROOT / "self_opt.png", ROOT / "self_sar.png", ROOT / "run" / "best.ckpt", ROOT / "self_reg")
linear_err = np.abs(reg.phi.linear - np.eye(2)).max()
trans_err = np.abs(reg.phi.translation).max()
print(f"self-pair: linear err {linear_err:.4f}, translation err {trans_err:.4f} ({time.time()-t0:.0f}s)", flush=True)

# Large padded input capability: 1504x1504.
big = np.tile(self_img, (12, 12, 1))[:1504, :1504]
save_image_u8(ROOT / "big_opt.png", big)
save_image_u8(ROOT / "big_sar.png", big.mean(axis=2, keepdims=True))
t0 = time.time()
reg_big = register(ROOT / "big_opt.png", ROOT / "big_sar.png", ROOT / "run" / "best.ckpt", ROOT / "big_reg", n_iters=8)
print(f"1504 register ok in {time.time()-t0:.0f}s; phi {reg_big.phi.mu.ravel().round(4)}", flush=True)
print(f"[{time.time()-t_start:.0f}s] calibration complete", flush=True)
