"""The four monitor families: training, calibration, runtime evaluation.

A monitor watches one recorded layer. Training fits per-class structures
over the monitored neurons (all neurons, or a selection mask's subset):

  gaussian                per-neuron interval mean +- kappa*std, one profile
  clustered_gaussian      k-means per class, then intervals per cluster
  box                     per-cluster [min, max] boxes, enlarged by gamma
  multivariate_gaussian   per-cluster multivariate Gaussian

The vote kinds score a sample by the fraction of monitored neurons whose
value falls inside a cluster's intervals (closed bounds), taking the best
cluster; the multivariate kind scores by the minimum Mahalanobis distance.
Calibration picks the threshold so that the acceptance rate on held-out
correctly-classified data meets the target. A class that had fewer than
two correct training samples gets no profile and always alarms.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .clustering import kmeans
from .errors import (
    EmptyCalibration,
    InvalidParameter,
    MissingLayer,
    MonitorWarning,
    SchemaError,
)
from .selection import SelectionMask
from .stats import MultivariateFit, fit_gaussian, fit_multivariate, interval_bounds, mahalanobis_batch
from .trace import TraceSample, TraceSet

GAUSSIAN = "gaussian"
BOX = "box"
CLUSTERED_GAUSSIAN = "clustered_gaussian"
MULTIVARIATE_GAUSSIAN = "multivariate_gaussian"
KINDS = (GAUSSIAN, BOX, CLUSTERED_GAUSSIAN, MULTIVARIATE_GAUSSIAN)

VOTE_FRACTION = "vote_fraction"
DISTANCE = "distance"

MODEL_VERSION = 1

ACCEPT = "accept"
ALARM = "alarm"


@dataclass(frozen=True)
class MonitorConfig:
    layer: str
    kind: str
    clusters_per_class: int = 1
    kappa: float = 2.0
    gamma: float = 0.0
    ridge: float = 1e-6
    mask: SelectionMask | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameter(f"unknown monitor kind {self.kind!r}")
        if self.clusters_per_class < 1:
            raise InvalidParameter("clusters_per_class must be at least 1")
        if self.kind == GAUSSIAN and self.clusters_per_class != 1:
            raise InvalidParameter(
                "kind 'gaussian' does not cluster; use clustered_gaussian for k > 1"
            )
        if self.kappa <= 0:
            raise InvalidParameter("kappa must be positive")
        if self.gamma < 0:
            raise InvalidParameter("gamma must be non-negative")
        if self.ridge < 0:
            raise InvalidParameter("ridge must be non-negative")

    @property
    def threshold_kind(self) -> str:
        return DISTANCE if self.kind == MULTIVARIATE_GAUSSIAN else VOTE_FRACTION


@dataclass(frozen=True)
class ClusterProfile:
    centroid: np.ndarray  # over monitored neurons
    member_count: int
    low: np.ndarray | None = None  # vote kinds
    high: np.ndarray | None = None
    mvg: MultivariateFit | None = None  # multivariate kind


@dataclass(frozen=True)
class Threshold:
    kind: str  # vote_fraction or distance
    value: float


@dataclass(frozen=True)
class Verdict:
    decision: str  # accept or alarm
    score: float  # signed margin, higher = more in-model-scope
    best_cluster: int | None


@dataclass(frozen=True)
class MonitorModel:
    config: MonitorConfig
    per_class: tuple[tuple[ClusterProfile, ...], ...]  # empty tuple = degenerate
    monitored_neurons: tuple[tuple[int, ...], ...]
    threshold: Threshold | None = None

    @property
    def class_count(self) -> int:
        return len(self.per_class)


def _class_vectors(train: TraceSet, layer: str) -> list[np.ndarray]:
    if layer not in train.meta.layer_names:
        raise MissingLayer(f"layer {layer!r} not recorded in trace")
    dim = train.meta.layer(layer).dim
    rows: list[list[np.ndarray]] = [[] for _ in range(train.meta.class_count)]
    for sample in train.samples:
        rows[sample.true_label].append(sample.vectors[layer])
    return [
        np.stack(r) if r else np.empty((0, dim), dtype=np.float64) for r in rows
    ]


def _profile_cluster(config: MonitorConfig, members: np.ndarray, centroid: np.ndarray) -> ClusterProfile:
    if config.kind in (GAUSSIAN, CLUSTERED_GAUSSIAN):
        low, high = interval_bounds(fit_gaussian(members), config.kappa)
        return ClusterProfile(centroid=centroid, member_count=len(members), low=low, high=high)
    if config.kind == BOX:
        lo, hi = members.min(axis=0), members.max(axis=0)
        center, half = (lo + hi) / 2.0, (hi - lo) / 2.0
        grown = (1.0 + config.gamma) * half
        return ClusterProfile(
            centroid=centroid, member_count=len(members), low=center - grown, high=center + grown
        )
    fit = fit_multivariate(members, ridge=config.ridge)
    return ClusterProfile(centroid=centroid, member_count=len(members), mvg=fit)


def train_monitor(config: MonitorConfig, train: TraceSet, seed: int = 0) -> MonitorModel:
    """Fit per-class profiles; the result is uncalibrated (threshold None).

    The caller is expected to pass correctly-classified samples only (see
    trace.filter_correct). Classes with fewer than two samples become
    degenerate: no profiles, every prediction of that class alarms.
    """
    per_class_vectors = _class_vectors(train, config.layer)
    dim = train.meta.layer(config.layer).dim
    if config.mask is not None:
        if len(config.mask.per_class) != train.meta.class_count:
            raise InvalidParameter(
                f"mask covers {len(config.mask.per_class)} classes, "
                f"trace has {train.meta.class_count}"
            )
        config.mask.check_dim(dim)
        neuron_sets = config.mask.per_class
    else:
        neuron_sets = tuple(tuple(range(dim)) for _ in range(train.meta.class_count))

    profiles: list[tuple[ClusterProfile, ...]] = []
    for c, vectors in enumerate(per_class_vectors):
        chosen = vectors[:, neuron_sets[c]]
        if len(chosen) < 2:
            warnings.warn(
                f"class {c} has {len(chosen)} training samples; monitor will "
                "always alarm on it",
                MonitorWarning,
                stacklevel=2,
            )
            profiles.append(())
            continue
        k = config.clusters_per_class
        distinct = np.unique(chosen, axis=0).shape[0]
        if distinct < k:
            warnings.warn(
                f"class {c} has only {distinct} distinct points; using k={distinct}",
                MonitorWarning,
                stacklevel=2,
            )
            k = distinct
        clustering = kmeans(chosen, k, seed=seed + c)
        profiles.append(
            tuple(
                _profile_cluster(config, chosen[clustering.assignment == j], clustering.centroids[j])
                for j in range(k)
            )
        )
    return MonitorModel(
        config=config,
        per_class=tuple(profiles),
        monitored_neurons=neuron_sets,
        threshold=None,
    )


def _monitored_vector(model: MonitorModel, sample: TraceSample) -> np.ndarray:
    layer = model.config.layer
    if layer not in sample.vectors:
        raise MissingLayer(f"sample {sample.id!r} lacks layer {layer!r}")
    return sample.vectors[layer][list(model.monitored_neurons[sample.pred_label])]


def _distance_order(profiles: tuple[ClusterProfile, ...], v: np.ndarray) -> np.ndarray:
    dists = np.array([np.linalg.norm(v - p.centroid) for p in profiles])
    return np.argsort(dists, kind="stable")


def raw_score(model: MonitorModel, sample: TraceSample) -> tuple[np.ndarray, int | None]:
    """Per-cluster values for the sample's predicted class.

    Vote kinds return vote fractions, the multivariate kind Mahalanobis
    distances, both indexed by the class's profile order. best_cluster is
    the first cluster, scanning centroids nearest-first, that attains the
    best value (highest fraction / lowest distance). A degenerate class
    yields an empty array and best_cluster None.
    """
    profiles = model.per_class[sample.pred_label]
    if not profiles:
        return np.empty(0), None
    v = _monitored_vector(model, sample)
    order = _distance_order(profiles, v)
    if model.config.threshold_kind == VOTE_FRACTION:
        values = np.array(
            [((v >= p.low) & (v <= p.high)).mean() for p in profiles]
        )
        best = next(int(j) for j in order if values[j] == values.max())
        return values, best
    values = np.array([mahalanobis_batch(p.mvg, v[None, :])[0] for p in profiles])
    best = next(int(j) for j in order if values[j] == values.min())
    return values, best


def sample_score(model: MonitorModel, sample: TraceSample) -> float:
    """Uncalibrated per-sample score: max vote fraction, or -min distance.

    Degenerate predicted class gives -inf either way.
    """
    values, _ = raw_score(model, sample)
    if values.size == 0:
        return -math.inf
    if model.config.threshold_kind == VOTE_FRACTION:
        return float(values.max())
    return float(-values.min())


def calibrate_vote_threshold(scores: np.ndarray, target_accept: float) -> float:
    """Largest tau with (# scores >= tau) / n >= target_accept.

    That value is the m-th largest score with m = ceil(target*n): keeping
    tau there accepts at least m samples, while any higher tau accepts at
    most m-1 < target*n. target 0 gives tau 0 (accept everything).
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.size
    if n == 0:
        raise EmptyCalibration("no calibration scores")
    if not 0.0 <= target_accept <= 1.0:
        raise InvalidParameter("target_accept must lie in [0, 1]")
    m = math.ceil(target_accept * n)
    if m == 0:
        return 0.0
    tau = float(np.sort(scores)[n - m])
    if tau < 0.0:
        warnings.warn(
            "calibration target unattainable (degenerate-class samples in "
            "calibration set); threshold clamped to 0",
            MonitorWarning,
            stacklevel=2,
        )
        return 0.0
    return tau


def calibrate_distance_threshold(dists: np.ndarray, target_accept: float) -> float:
    """Smallest threshold accepting at least ceil(target*n) samples."""
    dists = np.asarray(dists, dtype=np.float64)
    n = dists.size
    if n == 0:
        raise EmptyCalibration("no calibration distances")
    if not 0.0 <= target_accept <= 1.0:
        raise InvalidParameter("target_accept must lie in [0, 1]")
    m = math.ceil(target_accept * n)
    ordered = np.sort(dists)
    value = float(ordered[m - 1]) if m > 0 else float(ordered[-1])
    if not math.isfinite(value):
        finite = ordered[np.isfinite(ordered)]
        warnings.warn(
            "calibration target unattainable (degenerate-class samples in "
            "calibration set); threshold clamped to the largest finite distance",
            MonitorWarning,
            stacklevel=2,
        )
        value = float(finite[-1]) if finite.size else 0.0
    return value


def calibrate(model: MonitorModel, calib: TraceSet, target_accept: float = 0.90) -> MonitorModel:
    """Return a copy of the model with its threshold set from calib data.

    calib must hold correctly-classified samples disjoint from training.
    Deterministic: same model and calib set always give the same threshold.
    """
    if not calib.samples:
        raise EmptyCalibration("calibration trace set is empty")
    if model.config.threshold_kind == VOTE_FRACTION:
        scores = np.array([sample_score(model, s) for s in calib.samples])
        value = calibrate_vote_threshold(scores, target_accept)
        return replace(model, threshold=Threshold(kind=VOTE_FRACTION, value=value))
    dists = np.array([-sample_score(model, s) for s in calib.samples])
    value = calibrate_distance_threshold(dists, target_accept)
    return replace(model, threshold=Threshold(kind=DISTANCE, value=value))


def evaluate(model: MonitorModel, sample: TraceSample) -> Verdict:
    """Accept/alarm verdict with a signed margin score.

    Vote kinds accept when some cluster's vote fraction reaches the
    threshold (score = best fraction - tau); the distance kind accepts
    when the closest cluster Gaussian is within the calibrated distance
    (score = threshold - min distance). score >= 0 means accept.
    """
    if model.threshold is None:
        raise InvalidParameter("model is not calibrated")
    values, best = raw_score(model, sample)
    if best is None:
        return Verdict(decision=ALARM, score=-math.inf, best_cluster=None)
    if model.threshold.kind == VOTE_FRACTION:
        score = float(values.max() - model.threshold.value)
    else:
        score = float(model.threshold.value - values.min())
    return Verdict(decision=ACCEPT if score >= 0 else ALARM, score=score, best_cluster=best)


# --- persistence -----------------------------------------------------------


def _config_record(config: MonitorConfig) -> dict:
    return {
        "layer": config.layer,
        "kind": config.kind,
        "clusters_per_class": config.clusters_per_class,
        "kappa": config.kappa,
        "gamma": config.gamma,
        "ridge": config.ridge,
        "mask": None if config.mask is None else [list(r) for r in config.mask.per_class],
    }


def _cluster_record(kind: str, p: ClusterProfile) -> dict:
    record = {"centroid": p.centroid.tolist(), "member_count": p.member_count}
    if kind == MULTIVARIATE_GAUSSIAN:
        record["mean"] = p.mvg.mean.tolist()
        record["chol"] = p.mvg.chol.tolist()
    else:
        record["low"] = p.low.tolist()
        record["high"] = p.high.tolist()
    return record


def save_model(model: MonitorModel, path: str | Path) -> None:
    record = {
        "version": MODEL_VERSION,
        "config": _config_record(model.config),
        "per_class": [
            {
                "class": c,
                "clusters": [_cluster_record(model.config.kind, p) for p in profiles],
            }
            for c, profiles in enumerate(model.per_class)
        ],
        "monitored_neurons": [list(r) for r in model.monitored_neurons],
        "threshold": None
        if model.threshold is None
        else {"kind": model.threshold.kind, "value": model.threshold.value},
    }
    Path(path).write_text(json.dumps(record, separators=(",", ":")) + "\n")


def _load_profile(kind: str, record: dict) -> ClusterProfile:
    centroid = np.asarray(record["centroid"], dtype=np.float64)
    count = int(record["member_count"])
    if kind == MULTIVARIATE_GAUSSIAN:
        return ClusterProfile(
            centroid=centroid,
            member_count=count,
            mvg=MultivariateFit(
                mean=np.asarray(record["mean"], dtype=np.float64),
                chol=np.asarray(record["chol"], dtype=np.float64),
            ),
        )
    return ClusterProfile(
        centroid=centroid,
        member_count=count,
        low=np.asarray(record["low"], dtype=np.float64),
        high=np.asarray(record["high"], dtype=np.float64),
    )


def load_model(path: str | Path) -> MonitorModel:
    try:
        record = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"model file {path}: malformed JSON ({err.msg})") from err
    try:
        version = record["version"]
        if version != MODEL_VERSION:
            raise SchemaError(
                f"model file {path}: version {version}, expected {MODEL_VERSION}"
            )
        raw_cfg = record["config"]
        mask = raw_cfg.get("mask")
        config = MonitorConfig(
            layer=raw_cfg["layer"],
            kind=raw_cfg["kind"],
            clusters_per_class=raw_cfg["clusters_per_class"],
            kappa=raw_cfg["kappa"],
            gamma=raw_cfg["gamma"],
            ridge=raw_cfg["ridge"],
            mask=None if mask is None else SelectionMask(tuple(tuple(r) for r in mask)),
        )
        entries = sorted(record["per_class"], key=lambda e: e["class"])
        per_class = tuple(
            tuple(_load_profile(config.kind, p) for p in entry["clusters"])
            for entry in entries
        )
        neurons = tuple(tuple(r) for r in record["monitored_neurons"])
        raw_thr = record["threshold"]
        threshold = (
            None
            if raw_thr is None
            else Threshold(kind=raw_thr["kind"], value=raw_thr["value"])
        )
    except (KeyError, TypeError) as err:
        raise SchemaError(f"model file {path}: missing or malformed field ({err})") from err
    return MonitorModel(
        config=config, per_class=per_class, monitored_neurons=neurons, threshold=threshold
    )
