"""Tiny built-in datasets for demos and tests."""

from __future__ import annotations

import numpy as np

from .trace import ACTIVATION, LayerSpec, TraceMeta, TraceSample, TraceSet

# 30 two-dimensional activation values of one class, forming two visible
# clumps around (2.2, 1.8) and (4.0, 3.7). A single Gaussian fitted over
# all of them covers the empty region between the clumps, which is the
# failure mode per-cluster monitors exist to fix.
_TWO_CLUSTER_XY = (
    (2.0, 2.0), (2.5, 1.5), (2.2, 2.0), (2.8, 2.2), (1.0, 1.0),
    (2.0, 1.5), (1.2, 1.8), (1.8, 1.2), (4.0, 4.0), (3.5, 3.0),
    (4.2, 3.5), (4.0, 3.0), (3.0, 4.0), (3.8, 3.8), (3.2, 3.2),
    (3.5, 3.5), (5.0, 4.2), (4.8, 3.9), (5.2, 5.5), (5.0, 3.5),
    (3.0, 2.1), (3.5, 3.3), (3.6, 3.4), (3.0, 3.2), (2.7, 1.9),
    (2.7, 1.6), (2.2, 2.2), (2.6, 2.1), (2.7, 2.0), (2.1, 2.2),
)


def two_cluster_points() -> np.ndarray:
    """The 30 bimodal 2-D points as an (30, 2) array."""
    return np.array(_TWO_CLUSTER_XY, dtype=np.float64)


def two_cluster_traces(layer: str = "A2") -> TraceSet:
    """The fixture wrapped as a single-class trace set.

    Every point becomes a correctly-classified sample of class 0 whose
    only recorded layer holds the 2-D value, so monitors can be trained
    on it directly. class_count is 2 because a monitoring problem with a
    single label is vacuous; class 1 simply has no samples.
    """
    meta = TraceMeta(
        class_count=2,
        layers=(LayerSpec(name=layer, dim=2, quantity=ACTIVATION),),
        source="two_cluster_fixture",
    )
    samples = tuple(
        TraceSample(
            id=f"fixture-{i:02d}",
            true_label=0,
            pred_label=0,
            vectors={layer: np.array(p)},
        )
        for i, p in enumerate(_TWO_CLUSTER_XY)
    )
    return TraceSet(meta=meta, samples=samples)
