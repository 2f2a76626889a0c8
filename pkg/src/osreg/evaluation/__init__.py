"""Metrics, test-set evaluation, registration artifacts, and reports."""

from .evaluate import EvalResult, evaluate_manifest, evaluate_model, predicted_flow_field
from .metrics import ABSENT, MetricsRecord, aggregate, epe_pair, format_cell, summarize
from .registration import (
    RegistrationResult,
    checkerboard,
    corner_box_overlay,
    predict_flow_tiled,
    register,
)
from .report import cmr_curve, load_report, plot_cmr_curves, render_table, write_report

__all__ = [
    "MetricsRecord",
    "ABSENT",
    "epe_pair",
    "aggregate",
    "summarize",
    "format_cell",
    "EvalResult",
    "evaluate_manifest",
    "evaluate_model",
    "predicted_flow_field",
    "RegistrationResult",
    "register",
    "predict_flow_tiled",
    "checkerboard",
    "corner_box_overlay",
    "write_report",
    "render_table",
    "plot_cmr_curves",
    "cmr_curve",
    "load_report",
]
