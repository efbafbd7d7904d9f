"""Gradient-based neuron relevance and top-fraction selection.

abs_score of neuron t in layer l for class j sums, over the class's safe
inputs, the absolute partial derivative of output activation j with
respect to the neuron's monitored quantity. The monitoring-NN variant
replaces the original network's output by a small per-class net trained to
tell correct from incorrect samples, and differentiates that net's sigmoid
output with respect to the layer vector instead.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import nn
from .errors import (
    EmptyClassInputs,
    InvalidParameter,
    MissingNet,
    MonitorWarning,
    OneClassOnly,
    SchemaError,
)
from .trace import TraceSet, make_layer_name, parse_layer_name

ORIGINAL_NN = "original_nn"
MONITORING_NN = "monitoring_nn"
SCORERS = (ORIGINAL_NN, MONITORING_NN)

MONITORING_HIDDEN = (64, 32, 16)


@dataclass(frozen=True)
class SelectionMask:
    """Per class, the ordered indices of the neurons a monitor watches."""

    per_class: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "per_class", tuple(tuple(int(i) for i in row) for row in self.per_class)
        )
        for c, row in enumerate(self.per_class):
            if not row:
                raise InvalidParameter(f"mask for class {c} is empty")
            if len(set(row)) != len(row):
                raise InvalidParameter(f"mask for class {c} has duplicate indices")
            if min(row) < 0:
                raise InvalidParameter(f"mask for class {c} has negative indices")

    def check_dim(self, dim: int) -> None:
        for c, row in enumerate(self.per_class):
            if max(row) >= dim:
                raise InvalidParameter(
                    f"mask for class {c} indexes neuron {max(row)}, layer has {dim}"
                )


@dataclass(frozen=True)
class AbsScoreTable:
    """Relevance scores, one row per class, one column per layer neuron.

    A class with no inputs keeps a zero row and inputs_per_class 0; such a
    table is incomplete and cannot feed select_top_fraction.
    """

    layer: str
    quantity: str
    scores: np.ndarray  # (classes, neurons)
    inputs_per_class: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "scores", np.asarray(self.scores, dtype=np.float64))
        object.__setattr__(self, "inputs_per_class", tuple(self.inputs_per_class))
        if self.scores.ndim != 2:
            raise InvalidParameter(f"scores must be 2-D, got shape {self.scores.shape}")
        if len(self.inputs_per_class) != self.scores.shape[0]:
            raise InvalidParameter("inputs_per_class length must match score rows")
        present = [c for c, n in enumerate(self.inputs_per_class) if n > 0]
        block = self.scores[present]
        if not (np.isfinite(block).all() and (block >= 0).all()):
            raise InvalidParameter("scores must be finite and non-negative")

    @property
    def complete(self) -> bool:
        return all(n > 0 for n in self.inputs_per_class)


def abs_scores(
    net: nn.NeuralNet,
    safe_inputs: list[list[np.ndarray]],
    layer: int,
    quantity: str,
) -> AbsScoreTable:
    """Score layer neurons by summed absolute output gradients.

    safe_inputs[j] holds raw input vectors whose prediction is trusted for
    class j. layer is the hidden-layer index into net.layers; the table
    records the corresponding trace layer name. Classes with no inputs get
    a zero row, a warning, and inputs_per_class 0.
    """
    width = net.layers[layer].fan_out
    scores = np.zeros((len(safe_inputs), width))
    counts = []
    for j, inputs in enumerate(safe_inputs):
        if not inputs:
            warnings.warn(
                f"class {j} has no safe inputs; scores row left empty",
                MonitorWarning,
                stacklevel=2,
            )
            counts.append(0)
            continue
        for x in inputs:
            jac = nn.jacobian(net, x, layer, quantity)
            scores[j] += np.abs(jac[j])
        counts.append(len(inputs))
    return AbsScoreTable(
        layer=make_layer_name(layer + 2, quantity),
        quantity=quantity,
        scores=scores,
        inputs_per_class=tuple(counts),
    )


def train_monitoring_nn(
    train: TraceSet,
    layer: str,
    class_label: int,
    hidden: tuple[int, int, int] = MONITORING_HIDDEN,
    hyper: nn.TrainConfig | None = None,
) -> nn.NeuralNet:
    """Per-class scorer net: 3 ReLU hidden layers, one sigmoid output.

    Trained on the layer vectors of samples the original net predicted as
    class_label; target 1 for correct predictions, 0 for mispredictions.
    """
    dim = train.meta.layer(layer).dim
    data = [
        (s.vectors[layer], 1 if s.correct else 0)
        for s in train.samples
        if s.pred_label == class_label
    ]
    labels = {t for _, t in data}
    if len(labels) < 2:
        raise OneClassOnly(
            f"class {class_label}: need both correct and incorrect samples, "
            f"got labels {sorted(labels)}"
        )
    if hyper is None:
        hyper = nn.TrainConfig(epochs=200, batch_size=16)
    hyper = replace(hyper, loss=nn.BINARY_CROSS_ENTROPY)
    arch = [(dim, hidden[0], nn.RELU)]
    for a, b in zip(hidden, hidden[1:]):
        arch.append((a, b, nn.RELU))
    arch.append((hidden[-1], 1, nn.SIGMOID))
    return nn.train_mlp(data, arch, hyper).net


def binary_accuracy(net: nn.NeuralNet, vectors: np.ndarray, targets: np.ndarray) -> float:
    """Fraction of 0/1 targets matched by thresholding the net at 0.5."""
    _, activations = nn.forward_batch(net, vectors)
    predicted = (activations[-1][:, 0] >= 0.5).astype(int)
    return float((predicted == np.asarray(targets)).mean())


def abs_scores_via_monitoring_nn(
    monitoring_nets: list[nn.NeuralNet | None],
    train: TraceSet,
    layer: str,
) -> AbsScoreTable:
    """abs_score variant differentiating each class's monitoring net.

    scores[j][t] sums |d(sigmoid output)/d v_t| over the layer vectors of
    correctly-classified samples predicted as class j.
    """
    if len(monitoring_nets) != train.meta.class_count:
        raise MissingNet(
            f"need {train.meta.class_count} nets, got {len(monitoring_nets)}"
        )
    dim = train.meta.layer(layer).dim
    scores = np.zeros((train.meta.class_count, dim))
    counts = [0] * train.meta.class_count
    for s in train.samples:
        if not s.correct:
            continue
        j = s.pred_label
        net = monitoring_nets[j]
        if net is None:
            raise MissingNet(f"no monitoring net for class {j}")
        scores[j] += np.abs(nn.input_jacobian(net, s.vectors[layer])[0])
        counts[j] += 1
    for j in range(train.meta.class_count):
        if counts[j] == 0:
            warnings.warn(
                f"class {j} has no correct samples; scores row left empty",
                MonitorWarning,
                stacklevel=2,
            )
    return AbsScoreTable(
        layer=layer,
        quantity=parse_layer_name(layer)[1],
        scores=scores,
        inputs_per_class=tuple(counts),
    )


def select_top_fraction(table: AbsScoreTable, fraction: float) -> SelectionMask:
    """Keep the ceil(fraction * d) highest-scoring neurons per class.

    Ties go to the smaller neuron index; mask rows come out ascending.
    """
    if not 0.0 < fraction <= 1.0:
        raise InvalidParameter(f"fraction must be in (0, 1], got {fraction}")
    if not table.complete:
        missing = [c for c, n in enumerate(table.inputs_per_class) if n == 0]
        raise EmptyClassInputs(f"score table has no inputs for classes {missing}")
    d = table.scores.shape[1]
    keep = int(np.ceil(fraction * d))
    rows = []
    for row in table.scores:
        order = np.argsort(-row, kind="stable")  # stable: ties by smaller index
        rows.append(tuple(sorted(int(i) for i in order[:keep])))
    return SelectionMask(per_class=tuple(rows))


# --- persistence -----------------------------------------------------------


def save_mask(mask: SelectionMask, path: str | Path) -> None:
    record = {"per_class": [list(row) for row in mask.per_class]}
    Path(path).write_text(json.dumps(record, separators=(",", ":")) + "\n")


def load_mask(path: str | Path) -> SelectionMask:
    try:
        record = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"mask file {path}: malformed JSON ({err.msg})") from err
    try:
        rows = record["per_class"]
        mask = SelectionMask(per_class=tuple(tuple(row) for row in rows))
    except (KeyError, TypeError) as err:
        raise SchemaError(f"mask file {path}: missing or malformed field ({err})") from err
    except InvalidParameter as err:
        raise SchemaError(f"mask file {path}: {err}") from err
    return mask


def save_scores(table: AbsScoreTable, path: str | Path) -> None:
    record = {
        "layer": table.layer,
        "quantity": table.quantity,
        "scores": table.scores.tolist(),
        "inputs_per_class": list(table.inputs_per_class),
    }
    Path(path).write_text(json.dumps(record, separators=(",", ":")) + "\n")


def load_scores(path: str | Path) -> AbsScoreTable:
    try:
        record = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"score file {path}: malformed JSON ({err.msg})") from err
    try:
        return AbsScoreTable(
            layer=record["layer"],
            quantity=record["quantity"],
            scores=np.asarray(record["scores"], dtype=np.float64),
            inputs_per_class=tuple(record["inputs_per_class"]),
        )
    except (KeyError, TypeError) as err:
        raise SchemaError(f"score file {path}: missing or malformed field ({err})") from err
