"""Minimal dense feed-forward networks.

Covers exactly what the monitors need: a forward pass that records every
layer's pre-activation and activation, analytic Jacobians of the output
activations with respect to any hidden layer (or the input), and a small
deterministic SGD trainer for synthetic tasks and auxiliary scoring nets.

Convention: a layer's weight matrix W has shape (fan_in, fan_out) and the
pre-activation of layer l is z_l = W_l^T a_{l-1} + b_l. Following common
usage, the input counts as level 1, so a network with two dense layers has
levels 2 and 3 and its output is level 3.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    DivergedError,
    InvalidParameter,
    SchemaError,
    UnsupportedLayer,
)

RELU = "relu"
IDENTITY = "identity"
SIGMOID = "sigmoid"
ACTIVATIONS = (RELU, IDENTITY, SIGMOID)

CROSS_ENTROPY = "cross_entropy_on_logits"
BINARY_CROSS_ENTROPY = "binary_cross_entropy_on_sigmoid"


def _apply(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == RELU:
        return np.maximum(z, 0.0)
    if kind == IDENTITY:
        return z
    if kind == SIGMOID:
        return 1.0 / (1.0 + np.exp(-z))
    raise InvalidParameter(f"unknown activation {kind!r}")


def _derivative(kind: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    # ReLU subgradient at exactly 0 is defined as 0.
    if kind == RELU:
        return (z > 0.0).astype(np.float64)
    if kind == IDENTITY:
        return np.ones_like(z)
    if kind == SIGMOID:
        return a * (1.0 - a)
    raise InvalidParameter(f"unknown activation {kind!r}")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)
    activation: str = RELU

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise DimensionMismatch(f"weights must be 2-D, got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[1],):
            raise DimensionMismatch(
                f"bias shape {self.bias.shape} does not match fan_out "
                f"{self.weights.shape[1]}"
            )
        if self.activation not in ACTIVATIONS:
            raise InvalidParameter(f"unknown activation {self.activation!r}")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise InvalidParameter("layer parameters must be finite")

    @property
    def fan_in(self) -> int:
        return self.weights.shape[0]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[1]


@dataclass
class NeuralNet:
    layers: list[DenseLayer]

    def __post_init__(self):
        if not self.layers:
            raise DimensionMismatch("a network needs at least one layer")
        for prev, layer in zip(self.layers, self.layers[1:]):
            if layer.fan_in != prev.fan_out:
                raise DimensionMismatch(
                    f"layer fan_in {layer.fan_in} does not chain with previous "
                    f"fan_out {prev.fan_out}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].fan_out


@dataclass
class LayerTrace:
    """Forward-pass record: the input plus every layer's z and a vectors."""

    input: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]


def forward(net: NeuralNet, x: np.ndarray) -> LayerTrace:
    """Run one input through the network, recording every layer."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise DimensionMismatch(
            f"input shape {x.shape} does not match input dim {net.input_dim}"
        )
    zs: list[np.ndarray] = []
    activations: list[np.ndarray] = []
    a = x
    for layer in net.layers:
        z = layer.weights.T @ a + layer.bias
        a = _apply(layer.activation, z)
        zs.append(z)
        activations.append(a)
    return LayerTrace(input=x, pre_activations=zs, activations=activations)


def forward_batch(net: NeuralNet, xs: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Vectorized forward over an (n, input_dim) batch; returns (zs, activations)."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != net.input_dim:
        raise DimensionMismatch(
            f"batch shape {xs.shape} does not match input dim {net.input_dim}"
        )
    zs, activations = [], []
    a = xs
    for layer in net.layers:
        z = a @ layer.weights + layer.bias
        a = _apply(layer.activation, z)
        zs.append(z)
        activations.append(a)
    return zs, activations


def predict(net: NeuralNet, x: np.ndarray) -> int:
    """Class label: argmax over the final layer's pre-activations.

    Ties break toward the smallest index.
    """
    trace = forward(net, x)
    return int(np.argmax(trace.pre_activations[-1]))


def predict_batch(net: NeuralNet, xs: np.ndarray) -> np.ndarray:
    zs, _ = forward_batch(net, xs)
    return np.argmax(zs[-1], axis=1)


def jacobian(
    net: NeuralNet, x: np.ndarray, layer: int, quantity: str = "activation"
) -> np.ndarray:
    """Jacobian of the output activations w.r.t. one hidden layer.

    Entry (j, t) is the partial derivative of output activation j with
    respect to neuron t's chosen quantity at the given input. Computed by
    chaining diag(f'(z_k)) W_k^T through every layer after the monitored
    one; the pre-activation variant additionally scales column t by
    f'(z_{l,t}).
    """
    if not 0 <= layer < len(net.layers) - 1:
        raise UnsupportedLayer(
            f"layer {layer} is not a hidden layer (net has {len(net.layers)} layers)"
        )
    trace = forward(net, x)
    width = net.layers[layer].fan_out
    jac = np.eye(width)
    for k in range(layer + 1, len(net.layers)):
        z, a = trace.pre_activations[k], trace.activations[k]
        jac = _derivative(net.layers[k].activation, z, a)[:, None] * (
            net.layers[k].weights.T @ jac
        )
    if quantity == "pre_activation":
        z, a = trace.pre_activations[layer], trace.activations[layer]
        jac = jac * _derivative(net.layers[layer].activation, z, a)[None, :]
    elif quantity != "activation":
        raise InvalidParameter(f"unknown quantity {quantity!r}")
    return jac


def input_jacobian(net: NeuralNet, x: np.ndarray) -> np.ndarray:
    """Jacobian of the output activations w.r.t. the raw input vector."""
    trace = forward(net, x)
    jac = np.eye(net.input_dim)
    for k in range(len(net.layers)):
        z, a = trace.pre_activations[k], trace.activations[k]
        jac = _derivative(net.layers[k].activation, z, a)[:, None] * (
            net.layers[k].weights.T @ jac
        )
    return jac


# --- training --------------------------------------------------------------


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    loss: str = CROSS_ENTROPY


@dataclass
class TrainResult:
    net: NeuralNet
    final_loss: float


def init_net(shapes: list[tuple[int, int, str]], seed: int) -> NeuralNet:
    """Seeded Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, activation in shapes:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        layers.append(DenseLayer(weights=weights, bias=np.zeros(fan_out), activation=activation))
    return NeuralNet(layers=layers)


def _loss_and_delta(loss: str, logits_or_probs: np.ndarray, targets: np.ndarray):
    if loss == CROSS_ENTROPY:
        logits = logits_or_probs
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        n = logits.shape[0]
        value = -log_probs[np.arange(n), targets].mean()
        delta = np.exp(log_probs)
        delta[np.arange(n), targets] -= 1.0
        return value, delta / n
    if loss == BINARY_CROSS_ENTROPY:
        probs = np.clip(logits_or_probs[:, 0], 1e-12, 1.0 - 1e-12)
        y = targets.astype(np.float64)
        value = -(y * np.log(probs) + (1.0 - y) * np.log(1.0 - probs)).mean()
        # gradient w.r.t. the pre-sigmoid logit
        delta = ((probs - y) / probs.shape[0])[:, None]
        return value, delta
    raise InvalidParameter(f"unknown loss {loss!r}")


def train_mlp(
    data: list[tuple[np.ndarray, int]],
    arch: list[tuple[int, int, str]],
    hyper: TrainConfig,
) -> TrainResult:
    """Mini-batch SGD, fully deterministic for a fixed seed.

    cross_entropy_on_logits requires an identity output layer (the loss
    applies softmax itself); binary_cross_entropy_on_sigmoid requires a
    single sigmoid output and 0/1 targets.
    """
    if hyper.loss == CROSS_ENTROPY and arch[-1][2] != IDENTITY:
        raise InvalidParameter("cross_entropy_on_logits needs an identity output layer")
    if hyper.loss == BINARY_CROSS_ENTROPY and (
        arch[-1][2] != SIGMOID or arch[-1][1] != 1
    ):
        raise InvalidParameter(
            "binary_cross_entropy_on_sigmoid needs a single sigmoid output"
        )

    xs = np.stack([np.asarray(x, dtype=np.float64) for x, _ in data])
    ys = np.array([t for _, t in data])
    net = init_net(arch, seed=hyper.seed)
    rng = np.random.default_rng(hyper.seed + 1)

    # overflow is legal here; it is detected and reported as DivergedError
    with np.errstate(over="ignore", invalid="ignore"):
        _run_sgd(net, xs, ys, hyper, rng)

    zs, activations = forward_batch(net, xs)
    head = zs[-1] if hyper.loss == CROSS_ENTROPY else activations[-1]
    final_loss, _ = _loss_and_delta(hyper.loss, head, ys)
    if not np.isfinite(final_loss):
        raise DivergedError(f"training loss became {final_loss}")
    return TrainResult(net=net, final_loss=float(final_loss))


def _run_sgd(
    net: NeuralNet,
    xs: np.ndarray,
    ys: np.ndarray,
    hyper: TrainConfig,
    rng: np.random.Generator,
) -> None:
    for _ in range(hyper.epochs):
        order = rng.permutation(len(xs))
        for start in range(0, len(xs), hyper.batch_size):
            batch = order[start : start + hyper.batch_size]
            xb, yb = xs[batch], ys[batch]
            zs, activations = forward_batch(net, xb)
            head = zs[-1] if hyper.loss == CROSS_ENTROPY else activations[-1]
            if not np.isfinite(head).all():
                raise DivergedError("network output became non-finite during training")
            value, delta = _loss_and_delta(hyper.loss, head, yb)
            if not np.isfinite(value):
                raise DivergedError(f"training loss became {value}")
            for k in range(len(net.layers) - 1, -1, -1):
                below = xb if k == 0 else activations[k - 1]
                grad_w = below.T @ delta
                grad_b = delta.sum(axis=0)
                if k > 0:
                    delta = (delta @ net.layers[k].weights.T) * _derivative(
                        net.layers[k - 1].activation, zs[k - 1], activations[k - 1]
                    )
                net.layers[k].weights -= hyper.learning_rate * grad_w
                net.layers[k].bias -= hyper.learning_rate * grad_b


# --- persistence -----------------------------------------------------------


def save_net(net: NeuralNet, path: str | Path) -> None:
    record = {
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in net.layers
        ]
    }
    Path(path).write_text(json.dumps(record, separators=(",", ":")) + "\n")


def load_net(path: str | Path) -> NeuralNet:
    try:
        record = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"net file {path}: malformed JSON ({err.msg})") from err
    try:
        layers = [
            DenseLayer(
                weights=np.asarray(spec["weights"], dtype=np.float64),
                bias=np.asarray(spec["bias"], dtype=np.float64),
                activation=spec["activation"],
            )
            for spec in record["layers"]
        ]
    except (KeyError, TypeError) as err:
        raise SchemaError(f"net file {path}: missing or malformed field ({err})") from err
    return NeuralNet(layers=layers)
