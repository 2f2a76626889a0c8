"""Command-line entry point binding dataset generation, training, evaluation,
registration, and reporting, with a reproducibility manifest in every output
directory."""

from __future__ import annotations

import argparse
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .configio import PROFILES, build_dataclass, dump_flat_config, load_flat_config, merge_config, write_flat_config
from .evaluation import evaluate_model, register, write_report
from .geometry import read_affine_text
from .model import ModelConfig, RegistrationNetwork, load_checkpoint
from .pairgen import (
    PROFILES as BOUNDS_PROFILES,
    RegisteredPair,
    build_dataset,
    file_digest,
    load_image_f64,
    procedural_pair,
)
from .training import LossConfig, SampleDataset, TrainConfig, train

ENV_CONFIG = "OSREG_CONFIG"
RUN_MANIFEST_NAME = "run_manifest.json"


def write_run_manifest(
    out_dir: Path,
    subcommand: str,
    config: dict,
    inputs: dict[str, str],
    outputs: list[str],
    seeds: list[int],
    started: float,
    argv: list[str],
) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "subcommand": subcommand,
        "argv": argv,
        "config": config,
        "seeds": seeds,
        "inputs": inputs,
        "outputs": sorted(outputs),
        "tool_version": __version__,
        "started_utc": datetime.fromtimestamp(started, tz=timezone.utc).isoformat(),
        "wall_clock_s": round(time.time() - started, 3),
    }
    path = out_dir / RUN_MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _resolve_config(args) -> dict:
    """Profile defaults, then the config file (flag or environment), then flags."""
    import os

    cfg = PROFILES[args.profile]()
    config_path = getattr(args, "config", None) or os.environ.get(ENV_CONFIG)
    if config_path:
        cfg = merge_config(cfg, load_flat_config(config_path))
    # The resolved config must round-trip through the flat format.
    from .configio import parse_flat_config

    if parse_flat_config(dump_flat_config(cfg)) != cfg:
        raise ValueError("resolved configuration does not round-trip the flat format")
    return cfg


def _load_pairs_dir(pairs_dir: Path) -> list[RegisteredPair]:
    pairs_dir = Path(pairs_dir)
    pairs = []
    for opt_path in sorted(pairs_dir.glob("*_opt.png")):
        pair_id = opt_path.name[: -len("_opt.png")]
        sar_path = pairs_dir / f"{pair_id}_sar.png"
        if not sar_path.exists():
            raise FileNotFoundError(f"missing SAR image for pair {pair_id}: {sar_path}")
        pairs.append(
            RegisteredPair(
                optical=load_image_f64(opt_path, channels=3),
                sar=load_image_f64(sar_path, channels=1),
                id=pair_id,
            )
        )
    if not pairs:
        raise FileNotFoundError(f"no '<id>_opt.png' images found in {pairs_dir}")
    return pairs


def cmd_pairgen(args, argv) -> int:
    started = time.time()
    cfg = _resolve_config(args)
    size = args.size or cfg["pairgen"]["size"]
    crop = args.crop or cfg["pairgen"]["crop"]
    bounds = BOUNDS_PROFILES[args.bounds]

    inputs: dict[str, str] = {}
    if args.procedural:
        rng = np.random.default_rng(np.random.SeedSequence([args.pair_seed, size]))
        pairs = [procedural_pair(f"pair{i:04d}", size, size, rng) for i in range(args.procedural)]
    else:
        pairs = _load_pairs_dir(args.pairs)
        for p in sorted(Path(args.pairs).glob("*.png")):
            inputs[str(p)] = file_digest(p)

    out = Path(args.out)
    manifest = build_dataset(pairs, bounds, args.split, args.seed, out, crop)
    cfg["pairgen"].update({"size": size, "crop": crop, "bounds": args.bounds, "count": len(pairs)})
    write_run_manifest(
        out, "pairgen", cfg, inputs,
        [str(manifest.relative_to(out))], [args.seed, args.pair_seed], started, argv,
    )
    print(f"wrote {len(pairs)} samples to {manifest}")
    return 0


def cmd_train(args, argv) -> int:
    started = time.time()
    cfg = _resolve_config(args)
    model_cfg = build_dataclass(ModelConfig, cfg["model"], "model")
    loss_cfg = build_dataclass(LossConfig, cfg["loss"], "loss")
    train_cfg = build_dataclass(TrainConfig, cfg["training"], "training")

    data_dir = Path(args.data)
    train_manifest = data_dir / "train" / "manifest.jsonl"
    val_manifest = data_dir / "val" / "manifest.jsonl"
    if not train_manifest.exists():
        raise FileNotFoundError(f"expected training manifest at {train_manifest}")
    train_ds = SampleDataset(train_manifest)
    val_ds = SampleDataset(val_manifest) if val_manifest.exists() else None

    model = RegistrationNetwork(model_cfg)
    out = Path(args.out)
    result = train(model, train_ds, val_ds, loss_cfg, train_cfg, out, mode=args.mode)

    inputs = {str(train_manifest): file_digest(train_manifest)}
    if val_ds is not None:
        inputs[str(val_manifest)] = file_digest(val_manifest)
    outputs = [p.name for p in (result.latest_path, result.best_path, result.log_path) if p.exists()]
    write_flat_config(cfg, out / "resolved.cfg")
    outputs.append("resolved.cfg")
    write_run_manifest(out, "train", cfg, inputs, outputs, [train_cfg.seed], started, argv)
    print(f"trained {train_cfg.max_steps} steps (mode {args.mode}); best val AEPE {result.best_val_aepe:.4f}")
    return 0


def cmd_eval(args, argv) -> int:
    started = time.time()
    cfg = _resolve_config(args)
    model, payload = load_checkpoint(args.checkpoint)
    thresholds = [float(t) for t in args.thresholds.split(",")]
    n_iters = args.iters or int(
        payload.get("extra", {}).get("loss_config", {}).get("n_iters_eval", cfg["loss"]["n_iters_eval"])
    )

    manifests = [Path(m) for m in args.testsets]
    result = evaluate_model(model, manifests, thresholds, n_iters, args.mode)

    out = Path(args.out)
    config_echo = {"checkpoint": str(args.checkpoint), "mode": args.mode, "n_iters": n_iters,
                   "thresholds": thresholds, "testsets": [str(m) for m in manifests]}
    paths = write_report(result, out, config_echo=config_echo)

    inputs = {str(args.checkpoint): file_digest(args.checkpoint)}
    for m in manifests:
        inputs[str(m)] = file_digest(m)
    write_run_manifest(
        out, "eval", cfg, inputs, [p.name for p in paths.values()],
        [h["seed"] for h in (json.loads(Path(m).read_text().splitlines()[0]) for m in manifests)],
        started, argv,
    )
    mean, std = result.summary["aepe"]
    print(f"AEPE {mean:.4f}(±{std:.4f}) over {len(manifests)} set(s); report at {paths['json']}")
    return 0


def cmd_register(args, argv) -> int:
    started = time.time()
    cfg = _resolve_config(args)
    gt_phi = read_affine_text(args.gt_phi) if args.gt_phi else None
    out = Path(args.out)
    result = register(
        Path(args.opt), Path(args.sar), Path(args.checkpoint), out,
        gt_phi=gt_phi, n_iters=args.iters, tile=args.tile, overlap=args.overlap,
    )
    inputs = {
        str(args.opt): file_digest(args.opt),
        str(args.sar): file_digest(args.sar),
        str(args.checkpoint): file_digest(args.checkpoint),
    }
    if args.gt_phi:
        inputs[str(args.gt_phi)] = file_digest(args.gt_phi)
    write_run_manifest(
        out, "register", cfg, inputs, [p.name for p in result.paths.values()], [], started, argv
    )
    print("estimated affine:", " ".join(f"{v:.6f}" for v in result.phi.mu.ravel()))
    return 0


def cmd_report(args, argv) -> int:
    started = time.time()
    from .evaluation import EvalResult, MetricsRecord, load_report, summarize

    in_dir = Path(args.in_dir)
    report_files = sorted(in_dir.rglob("report.json"))
    if not report_files:
        raise FileNotFoundError(f"no report.json found under {in_dir}")

    out = Path(args.out)
    outputs: list[str] = []
    inputs: dict[str, str] = {}
    for rf in report_files:
        payload = load_report(rf)
        records = [MetricsRecord.from_dict(r) for r in payload["records"]]
        result = EvalResult(
            records=records,
            summary=summarize(records),
            mode=payload["mode"],
            n_iters=payload["n_iters"],
            thresholds=[float(t) for t in payload["thresholds"]],
        )
        stem = rf.parent.name or "report"
        sub = out / stem
        paths = write_report(result, sub, config_echo=payload.get("config"))
        outputs.extend(str(p.relative_to(out)) for p in paths.values())
        inputs[str(rf)] = file_digest(rf)

    write_run_manifest(out, "report", {"report": {"inputs": len(report_files)}}, inputs, outputs, [], started, argv)
    print(f"re-rendered {len(report_files)} report(s) into {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="osreg",
        description="Geometry-constrained dense registration of optical and SAR imagery.",
    )
    parser.add_argument("--version", action="version", version=f"osreg {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--profile", choices=sorted(PROFILES), default="paper",
                        help="named parameter profile supplying defaults")
    common.add_argument("--config", default=None,
                        help=f"flat section.key=value config file (default: ${ENV_CONFIG})")

    p = sub.add_parser("pairgen", parents=[common], help="generate a dataset split from registered pairs")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pairs", help="directory of <id>_opt.png / <id>_sar.png pairs")
    src.add_argument("--procedural", type=int, metavar="N", help="synthesize N procedural pairs instead")
    p.add_argument("--bounds", choices=sorted(BOUNDS_PROFILES), default="paper")
    p.add_argument("--seed", type=int, required=True, help="transform sampling seed")
    p.add_argument("--pair-seed", type=int, default=0, help="seed for procedural pair content")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--size", type=int, default=None, help="procedural pair size (profile default)")
    p.add_argument("--crop", type=int, default=None, help="center-crop size (profile default)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pairgen)

    p = sub.add_parser("train", parents=[common], help="optimize the model on a generated dataset")
    p.add_argument("--data", required=True, help="directory holding train/ (and optionally val/) datasets")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("none", "ls", "lsr"), default="lsr")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="score a checkpoint on seeded test sets")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--testsets", nargs="+", required=True, help="dataset manifest paths")
    p.add_argument("--mode", choices=("none", "ls", "lsr"), default="lsr")
    p.add_argument("--thresholds", default="1,2,5")
    p.add_argument("--iters", type=int, default=None, help="refinement iterations (checkpoint default)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("register", parents=[common], help="register one optical/SAR pair of any size")
    p.add_argument("--opt", required=True)
    p.add_argument("--sar", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gt-phi", default=None, help="six-float affine text file for overlay comparison")
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--tile", type=int, default=512)
    p.add_argument("--overlap", type=int, default=128)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("report", parents=[common], help="re-render report bundles from machine reports")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def dispatch(argv: list[str] | None = None) -> int:
    """Route argv to a subcommand; 0 on success, 1 on runtime failure, 2 on usage error."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help (0) and usage errors (2)
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
