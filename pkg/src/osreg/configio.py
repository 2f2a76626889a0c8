"""Flat `section.key = value` config files and named parameter profiles.

Values are parsed as Python literals when possible (ints, floats, booleans,
tuples), otherwise kept as strings. Files round-trip: dump(parse(text))
reproduces the same resolved mapping.
"""

from __future__ import annotations

import ast
from dataclasses import fields
from pathlib import Path

from .model.config import ModelConfig


def _parse_value(raw: str):
    raw = raw.strip()
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw


def parse_flat_config(text: str) -> dict[str, dict]:
    cfg: dict[str, dict] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'section.key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if "." not in key:
            raise ValueError(f"line {lineno}: key {key!r} must be section.key")
        section, _, name = key.partition(".")
        cfg.setdefault(section, {})[name] = _parse_value(value)
    return cfg


def load_flat_config(path) -> dict[str, dict]:
    return parse_flat_config(Path(path).read_text())


def dump_flat_config(cfg: dict[str, dict]) -> str:
    lines = []
    for section in sorted(cfg):
        for name in sorted(cfg[section]):
            lines.append(f"{section}.{name} = {cfg[section][name]!r}")
    return "\n".join(lines) + "\n"


def write_flat_config(cfg: dict[str, dict], path) -> None:
    Path(path).write_text(dump_flat_config(cfg))


def merge_config(base: dict[str, dict], override: dict[str, dict]) -> dict[str, dict]:
    merged = {section: dict(body) for section, body in base.items()}
    for section, body in override.items():
        merged.setdefault(section, {}).update(body)
    return merged


def build_dataclass(cls, section: dict, section_name: str):
    """Instantiate a config dataclass from a section, rejecting unknown keys."""
    known = {f.name for f in fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ValueError(f"unknown {section_name} config keys: {sorted(unknown)}")
    kwargs = dict(section)
    for f in fields(cls):
        if f.name in kwargs and isinstance(kwargs[f.name], list):
            kwargs[f.name] = tuple(kwargs[f.name])
    return cls(**kwargs)


def paper_profile() -> dict[str, dict]:
    """Full-scale defaults as published."""
    return {
        "model": ModelConfig().to_dict(),
        "loss": {
            "omega": 0.85,
            "lambda_seq": 0.5,
            "lambda_geo": 0.5,
            "n_iters_train": 12,
            "n_iters_eval": 32,
        },
        "training": {
            "learning_rate": 1.2e-5,
            "batch_size": 12,
            "max_steps": 120_000,
            "grad_clip": 1.0,
            "weight_decay": 1e-4,
            "seed": 0,
            "val_interval_fraction": 0.02,
            "warmup_fraction": 0.05,
        },
        "pairgen": {"size": 512, "crop": 400, "bounds": "paper", "count": 100},
        "eval": {"thresholds": (1.0, 2.0, 5.0)},
    }


def toy_profile() -> dict[str, dict]:
    """Desk-scale profile: small model, translation-only data, CPU-sized run."""
    cfg = paper_profile()
    cfg["model"] = ModelConfig.toy().to_dict()
    cfg["loss"].update({"n_iters_train": 8, "n_iters_eval": 24})
    cfg["training"].update(
        {"learning_rate": 2e-4, "batch_size": 4, "max_steps": 2000, "warmup_fraction": 0.01}
    )
    cfg["pairgen"] = {"size": 128, "crop": 96, "bounds": "toy", "count": 200}
    return cfg


PROFILES = {"paper": paper_profile, "toy": toy_profile}
