"""Activation monitors for neural-network classifiers.

Train per-class monitors over a network's hidden-layer values, calibrate
an alarm threshold on held-out data, and flag inputs the network is
likely getting wrong. See README.md for the pipeline walkthrough.
"""

from . import clustering, datasets, evaluation, monitors, nn, selection, stats, trace
from .errors import ActmonError, MonitorWarning
from .monitors import (
    MonitorConfig,
    MonitorModel,
    Threshold,
    Verdict,
    calibrate,
    evaluate,
    load_model,
    raw_score,
    save_model,
    train_monitor,
)
from .selection import AbsScoreTable, SelectionMask, abs_scores, select_top_fraction
from .trace import (
    LayerSpec,
    TraceMeta,
    TraceSample,
    TraceSet,
    filter_correct,
    load_traces,
    save_traces,
    split,
)

__version__ = "0.1.0"

__all__ = [
    "ActmonError",
    "MonitorWarning",
    "MonitorConfig",
    "MonitorModel",
    "Threshold",
    "Verdict",
    "AbsScoreTable",
    "SelectionMask",
    "LayerSpec",
    "TraceMeta",
    "TraceSample",
    "TraceSet",
    "abs_scores",
    "calibrate",
    "clustering",
    "datasets",
    "evaluate",
    "evaluation",
    "filter_correct",
    "load_model",
    "load_traces",
    "monitors",
    "nn",
    "raw_score",
    "save_model",
    "save_traces",
    "select_top_fraction",
    "selection",
    "split",
    "stats",
    "trace",
    "train_monitor",
    "__version__",
]
