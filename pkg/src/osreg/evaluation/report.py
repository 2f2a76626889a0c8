"""Report bundle: machine-readable JSON, mean(+/-std) tables, CMR-vs-threshold curves."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluate import EvalResult
from .metrics import ABSENT, MetricsRecord, format_cell


def cmr_curve(per_pair_epe: list[float], taus: np.ndarray) -> np.ndarray:
    epes = np.asarray(per_pair_epe)
    return np.array([100.0 * (epes < t).mean() for t in taus])


def render_table(result: EvalResult) -> str:
    """Human-readable summary table with mean(+/-std) cells and '-' sentinels."""
    s = result.summary
    single = s["n_sets"] == 1
    lines = [
        f"mode: {result.mode}   iterations: {result.n_iters}   sets: {s['n_sets']}",
        "",
        f"{'metric':<14} {'value':>18}",
        "-" * 33,
        f"{'AEPE':<14} {format_cell(s['aepe'], single=single):>18}",
        f"{'RMSE':<14} {format_cell(s['rmse'], single=single):>18}",
    ]
    for tau in result.thresholds:
        lines.append(
            f"{f'CMR@{tau:g}px':<14} {format_cell(s['cmr_at'][tau], single=single):>18}"
        )
        lines.append(
            f"{f'AEPE@{tau:g}px':<14} {format_cell(s['aepe_at'][tau], single=single):>18}"
        )
    lines.append("")
    for rec in result.records:
        lines.append(f"  {rec.label}: n={rec.n_pairs} AEPE={rec.aepe:.3f} RMSE={rec.rmse:.3f}")
    return "\n".join(lines) + "\n"


def plot_cmr_curves(result: EvalResult, path: Path, tau_max: float | None = None) -> None:
    """Mean CMR-vs-threshold curve with an across-set variance band."""
    if tau_max is None:
        top = max(max(r.per_pair_epe) for r in result.records)
        tau_max = float(max(5.0, np.ceil(top) + 1.0))
    taus = np.arange(0.0, tau_max + 1e-9, 0.1)
    curves = np.stack([cmr_curve(r.per_pair_epe, taus) for r in result.records])

    fig, ax = plt.subplots(figsize=(6, 4))
    mean = curves.mean(axis=0)
    ax.plot(taus, mean, color="tab:blue", label=f"mode {result.mode}")
    if curves.shape[0] > 1:
        ax.fill_between(taus, curves.min(axis=0), curves.max(axis=0), alpha=0.25, color="tab:blue")
    ax.set_xlabel("threshold (px)")
    ax.set_ylabel("CMR (%)")
    ax.set_xlim(0, tau_max)
    ax.set_ylim(0, 102)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(result: EvalResult, out_dir: Path, config_echo: dict | None = None) -> dict[str, Path]:
    """Emit report.json, report.txt, and the CMR curve image."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out_dir / "report.json",
        "table": out_dir / "report.txt",
        "curve": out_dir / "cmr_curve.png",
    }
    payload = result.to_dict()
    if config_echo is not None:
        payload["config"] = config_echo
    paths["json"].write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    paths["table"].write_text(render_table(result))
    plot_cmr_curves(result, paths["curve"])
    return paths


def load_report(path: Path) -> dict:
    return json.loads(Path(path).read_text())
