"""Endpoint-error metrics and their aggregation across a test set."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import FlowField

ABSENT = "-"  # rendered for undefined threshold-restricted means


def epe_pair(pred: FlowField, gt: FlowField) -> float:
    """Mean Euclidean endpoint error over the pair's valid pixels."""
    if pred.shape != gt.shape:
        raise ValueError(f"flow shapes differ: {pred.shape} vs {gt.shape}")
    valid = pred.valid & gt.valid
    m = int(valid.sum())
    if m == 0:
        raise ValueError("no valid pixels shared between prediction and ground truth")
    diff = pred.data[valid] - gt.data[valid]
    return float(np.sqrt((diff**2).sum(axis=1)).mean())


@dataclass
class MetricsRecord:
    """Per-set aggregation of per-pair endpoint errors.

    rmse follows the published formula exactly: the population standard
    deviation of per-pair EPE about the set mean (a dispersion measure,
    despite the name). cmr_at uses the strict inequality EPE < tau; aepe_at
    is None whenever no pair clears its threshold.
    """

    per_pair_epe: list[float]
    thresholds: list[float]
    aepe: float = field(init=False)
    rmse: float = field(init=False)
    cmr_at: dict[float, float] = field(init=False)
    aepe_at: dict[float, float | None] = field(init=False)
    n_at: dict[float, int] = field(init=False)
    n_pairs: int = field(init=False)
    label: str = ""

    def __post_init__(self) -> None:
        epes = np.asarray(self.per_pair_epe, dtype=np.float64)
        if epes.size == 0:
            raise ValueError("per-pair EPE list is empty")
        self.n_pairs = int(epes.size)
        self.aepe = float(epes.mean())
        self.rmse = float(np.sqrt(((epes - epes.mean()) ** 2).mean()))
        self.cmr_at, self.aepe_at, self.n_at = {}, {}, {}
        for tau in self.thresholds:
            below = epes < tau
            n_tau = int(below.sum())
            self.n_at[tau] = n_tau
            self.cmr_at[tau] = 100.0 * n_tau / self.n_pairs
            self.aepe_at[tau] = float(epes[below].mean()) if n_tau else None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n_pairs": self.n_pairs,
            "aepe": self.aepe,
            "rmse": self.rmse,
            "thresholds": list(self.thresholds),
            "cmr_at": {str(t): v for t, v in self.cmr_at.items()},
            "aepe_at": {str(t): v for t, v in self.aepe_at.items()},
            "n_at": {str(t): v for t, v in self.n_at.items()},
            "per_pair_epe": list(map(float, self.per_pair_epe)),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsRecord":
        rec = cls(
            per_pair_epe=list(data["per_pair_epe"]),
            thresholds=list(data["thresholds"]),
            label=data.get("label", ""),
        )
        return rec


def aggregate(per_pair_epe: list[float], thresholds: list[float], label: str = "") -> MetricsRecord:
    return MetricsRecord(per_pair_epe=list(per_pair_epe), thresholds=list(thresholds), label=label)


def _mean_std(values: list[float | None]) -> tuple[float, float] | None:
    if any(v is None for v in values):
        return None
    arr = np.asarray(values, dtype=np.float64)
    if np.all(arr == arr[0]):
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std())


def summarize(records: list[MetricsRecord]) -> dict:
    """Across-set mean and population std for every metric; None where any
    set's threshold-restricted mean is absent."""
    if not records:
        raise ValueError("no records to summarize")
    thresholds = records[0].thresholds
    for rec in records[1:]:
        if rec.thresholds != thresholds:
            raise ValueError("records disagree on thresholds")
    return {
        "n_sets": len(records),
        "aepe": _mean_std([r.aepe for r in records]),
        "rmse": _mean_std([r.rmse for r in records]),
        "cmr_at": {t: _mean_std([r.cmr_at[t] for r in records]) for t in thresholds},
        "aepe_at": {t: _mean_std([r.aepe_at[t] for r in records]) for t in thresholds},
    }


def format_cell(stat: tuple[float, float] | None, decimals: int = 2, single: bool = False) -> str:
    """Render mean(+/-std) table cells with the absent sentinel."""
    if stat is None:
        return ABSENT
    mean, std = stat
    if single:
        return f"{mean:.{decimals}f}"
    return f"{mean:.{decimals}f}(±{std:.{decimals}f})"
