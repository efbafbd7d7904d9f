"""OMS evaluation protocol: synthetic tasks, OMS categories, TPR, reports.

A monitor's job is to alarm on out-of-model-scope inputs, meaning inputs
the network gets wrong. Evaluation therefore builds categories of such
inputs: mispredicted in-distribution samples ("wrong_id"), perturbed
samples that flipped to a wrong prediction (perturbed-but-still-correct
samples are excluded), and novelty inputs with no in-scope label at all.
The true positive rate of a monitor on a category is the fraction of its
samples that raise an alarm.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from io import StringIO
from pathlib import Path

import numpy as np

from . import nn
from .errors import EmptyCategory, InvalidParameter, MonitorWarning
from .monitors import ALARM, MonitorModel, evaluate
from .trace import (
    ACTIVATION,
    PRE_ACTIVATION,
    LayerSpec,
    TraceMeta,
    TraceSample,
    TraceSet,
    make_layer_name,
    split,
)

GAUSSIAN_NOISE = "gaussian_noise"
SALT_AND_PEPPER = "salt_and_pepper"
CONTRAST = "contrast"
INVERT = "invert"
LIGHT = "light"
ROTATE = "rotate"
PERTURBATIONS = (GAUSSIAN_NOISE, SALT_AND_PEPPER, CONTRAST, INVERT, LIGHT, ROTATE)

WRONG_ID = "wrong_id"
NEW_WORLD = "new_world"
NOVELTY_TAG = "novelty"


@dataclass(frozen=True)
class OmsCategory:
    name: str
    samples: TraceSet

    def __len__(self) -> int:
        return len(self.samples.samples)


# --- synthetic task --------------------------------------------------------


@dataclass(frozen=True)
class TaskSpec:
    classes: int = 3
    input_dim: int = 2
    modes_per_class: int = 1
    samples: int = 3000
    seed: int = 0
    separation: float = 8.0  # min center distance in units of the mode stddev
    hidden: tuple[int, int] = (16, 16)

    def __post_init__(self):
        if self.classes < 2:
            raise InvalidParameter("need at least 2 classes")
        if self.input_dim < 1 or self.modes_per_class < 1:
            raise InvalidParameter("input_dim and modes_per_class must be positive")
        if self.samples < self.classes:
            raise InvalidParameter("need at least one sample per class")
        if self.separation <= 0:
            raise InvalidParameter("separation must be positive")


@dataclass(frozen=True)
class SyntheticTask:
    net: nn.NeuralNet
    train: TraceSet
    calib: TraceSet
    test: TraceSet
    test_accuracy: float


def _mode_centers(spec: TaskSpec, rng: np.random.Generator) -> np.ndarray:
    """(classes*modes, dim) centers, pairwise at least `separation` apart.

    Centers sit on a unit lattice scaled by the separation; enumerating
    lattice coordinates in mixed radix keeps them distinct without ever
    materializing the full grid.
    """
    count = spec.classes * spec.modes_per_class
    side = int(np.ceil(count ** (1.0 / spec.input_dim)))
    coords = np.zeros((count, spec.input_dim))
    for i in range(count):
        v, rest = np.zeros(spec.input_dim), i
        for axis in range(spec.input_dim):
            v[axis] = rest % side
            rest //= side
        coords[i] = v
    rng.shuffle(coords)
    return coords * spec.separation


def record_traces(
    net: nn.NeuralNet,
    inputs: np.ndarray,
    true_labels: np.ndarray,
    source: str,
    id_prefix: str = "s",
    tags: tuple[str, ...] = (),
) -> TraceSet:
    """Forward every input and package the recorded layers as a TraceSet.

    Captured layers: A1 (the raw input) plus pre-activations and
    activations of every hidden layer. Samples carrying the novelty tag
    have no in-scope label; they get a placeholder true_label that differs
    from the prediction so they always count as mispredicted.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    class_count = net.output_dim
    zs, activations = nn.forward_batch(net, inputs)
    preds = np.argmax(zs[-1], axis=1)
    novelty = NOVELTY_TAG in tags

    layers = [LayerSpec(name="A1", dim=net.input_dim, quantity=ACTIVATION)]
    for k in range(len(net.layers) - 1):
        level = k + 2
        layers.append(
            LayerSpec(make_layer_name(level, PRE_ACTIVATION), net.layers[k].fan_out, PRE_ACTIVATION)
        )
        layers.append(
            LayerSpec(make_layer_name(level, ACTIVATION), net.layers[k].fan_out, ACTIVATION)
        )
    meta = TraceMeta(class_count=class_count, layers=tuple(layers), source=source)

    samples = []
    width = len(str(max(len(inputs) - 1, 1)))
    for i in range(len(inputs)):
        pred = int(preds[i])
        true = (pred + 1) % class_count if novelty else int(true_labels[i])
        vectors = {"A1": inputs[i]}
        for k in range(len(net.layers) - 1):
            level = k + 2
            vectors[make_layer_name(level, PRE_ACTIVATION)] = zs[k][i]
            vectors[make_layer_name(level, ACTIVATION)] = activations[k][i]
        samples.append(
            TraceSample(
                id=f"{id_prefix}-{i:0{width}d}",
                true_label=true,
                pred_label=pred,
                vectors=vectors,
                tags=frozenset(tags),
            )
        )
    return TraceSet(meta=meta, samples=tuple(samples))


def raw_inputs(ts: TraceSet) -> np.ndarray:
    """Recover the raw input matrix recorded as layer A1."""
    return ts.vectors_for("A1")


def make_synthetic_task(spec: TaskSpec, trainer_hyper: nn.TrainConfig | None = None) -> SyntheticTask:
    """Gaussian-mixture classification task plus a trained 2-hidden-layer net.

    Inputs are drawn from modes_per_class unit-variance Gaussian modes per
    class, mode centers seeded and mutually separated. The recorded traces
    are split 50/25/25 into train/calib/test with per-class stratification.
    Fully deterministic for a fixed spec and hyper.
    """
    rng = np.random.default_rng(spec.seed)
    centers = _mode_centers(spec, rng)

    per_class = [spec.samples // spec.classes] * spec.classes
    for c in range(spec.samples - sum(per_class)):
        per_class[c] += 1
    xs, ys = [], []
    for c in range(spec.classes):
        modes = centers[c * spec.modes_per_class : (c + 1) * spec.modes_per_class]
        picks = rng.integers(len(modes), size=per_class[c])
        xs.append(modes[picks] + rng.standard_normal((per_class[c], spec.input_dim)))
        ys.append(np.full(per_class[c], c))
    inputs = np.concatenate(xs)
    labels = np.concatenate(ys)
    order = rng.permutation(len(inputs))
    inputs, labels = inputs[order], labels[order]

    if trainer_hyper is None:
        trainer_hyper = nn.TrainConfig(learning_rate=0.05, epochs=30, batch_size=32, seed=spec.seed)
    arch = [
        (spec.input_dim, spec.hidden[0], nn.RELU),
        (spec.hidden[0], spec.hidden[1], nn.RELU),
        (spec.hidden[1], spec.classes, nn.IDENTITY),
    ]
    data = [(inputs[i], int(labels[i])) for i in range(len(inputs))]
    net = nn.train_mlp(data, arch, trainer_hyper).net

    full = record_traces(net, inputs, labels, source=f"synthetic(seed={spec.seed})")
    train, calib, test = split(full, (0.5, 0.25, 0.25), seed=spec.seed)
    test_preds = test.pred_labels()
    accuracy = float((test_preds == test.true_labels()).mean())
    return SyntheticTask(net=net, train=train, calib=calib, test=test, test_accuracy=accuracy)


# --- perturbations ---------------------------------------------------------


def perturb(
    inputs: np.ndarray,
    kind: str,
    param: float | None = None,
    seed: int = 0,
    reference: np.ndarray | None = None,
) -> np.ndarray:
    """Feature-space analogues of common image corruptions.

    reference supplies the dataset statistics (per-dimension min, max,
    principal plane); it defaults to the inputs themselves. Kinds:

      gaussian_noise(sigma)   add N(0, sigma^2) per coordinate
      salt_and_pepper(p)      with prob p set a coordinate to the dataset
                              per-dimension min or max, fair coin
      contrast(c)             x -> mean(x) + c*(x - mean(x)), per-vector mean
      invert                  x -> (per-dimension max + min) - x
      light(b)                x -> x + b*(per-dimension range)
      rotate(theta)           rotate by theta radians in the plane of the
                              first two principal directions
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2:
        raise InvalidParameter(f"expected (n, d) inputs, got shape {inputs.shape}")
    ref = inputs if reference is None else np.asarray(reference, dtype=np.float64)
    rng = np.random.default_rng(seed)

    if kind == GAUSSIAN_NOISE:
        if param is None or param < 0:
            raise InvalidParameter("gaussian_noise needs sigma >= 0")
        return inputs + param * rng.standard_normal(inputs.shape)
    if kind == SALT_AND_PEPPER:
        if param is None or not 0 <= param <= 1:
            raise InvalidParameter("salt_and_pepper needs p in [0, 1]")
        lo, hi = ref.min(axis=0), ref.max(axis=0)
        hit = rng.random(inputs.shape) < param
        salt = rng.random(inputs.shape) < 0.5
        out = inputs.copy()
        extremes = np.where(salt, np.broadcast_to(hi, inputs.shape), np.broadcast_to(lo, inputs.shape))
        out[hit] = extremes[hit]
        return out
    if kind == CONTRAST:
        if param is None or param < 0:
            raise InvalidParameter("contrast needs c >= 0")
        means = inputs.mean(axis=1, keepdims=True)
        return means + param * (inputs - means)
    if kind == INVERT:
        lo, hi = ref.min(axis=0), ref.max(axis=0)
        return (hi + lo) - inputs
    if kind == LIGHT:
        if param is None:
            raise InvalidParameter("light needs a brightness factor")
        lo, hi = ref.min(axis=0), ref.max(axis=0)
        return inputs + param * (hi - lo)
    if kind == ROTATE:
        if param is None:
            raise InvalidParameter("rotate needs an angle in radians")
        if inputs.shape[1] < 2:
            raise InvalidParameter("rotate needs at least 2 input dimensions")
        mean = ref.mean(axis=0)
        centered = ref - mean
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        u, v = vt[0], vt[1]
        cos, sin = np.cos(param), np.sin(param)
        shifted = inputs - mean
        pu, pv = shifted @ u, shifted @ v
        rotated = (
            shifted
            + np.outer(pu * (cos - 1) - pv * sin, u)
            + np.outer(pu * sin + pv * (cos - 1), v)
        )
        return rotated + mean
    raise InvalidParameter(f"unknown perturbation kind {kind!r}")


# --- OMS categories --------------------------------------------------------


def _nonempty(name: str, ts: TraceSet) -> OmsCategory | None:
    if not ts.samples:
        warnings.warn(f"category {name!r} is empty; dropped", MonitorWarning, stacklevel=3)
        return None
    return OmsCategory(name=name, samples=ts)


def _keep_mispredicted(ts: TraceSet) -> TraceSet:
    kept = tuple(s for s in ts.samples if not s.correct)
    return TraceSet(meta=ts.meta, samples=kept)


def build_oms_sets(
    net: nn.NeuralNet,
    id_inputs: np.ndarray,
    id_labels: np.ndarray,
    novelty_inputs: np.ndarray | None = None,
    perturbation_grid: list[tuple[str, float | None]] = (),
    seed: int = 0,
) -> list[OmsCategory]:
    """Assemble the OMS categories used for TPR evaluation.

    wrong_id keeps the mispredicted ID test samples. Each perturbation
    entry (kind, param) produces a category of perturbed samples whose
    prediction no longer matches the original label; samples the net still
    gets right are excluded. Novelty inputs all count (no label in scope,
    so every alarm is correct). Empty categories warn and are dropped.
    """
    categories: list[OmsCategory] = []
    id_traced = record_traces(net, id_inputs, id_labels, source=WRONG_ID, id_prefix=WRONG_ID)
    cat = _nonempty(WRONG_ID, _keep_mispredicted(id_traced))
    if cat:
        categories.append(cat)
    for i, (kind, param) in enumerate(perturbation_grid):
        name = kind if param is None else f"{kind}_{param:g}"
        moved = perturb(id_inputs, kind, param, seed=seed + i, reference=id_inputs)
        traced = record_traces(net, moved, id_labels, source=name, id_prefix=name)
        cat = _nonempty(name, _keep_mispredicted(traced))
        if cat:
            categories.append(cat)
    if novelty_inputs is not None:
        traced = record_traces(
            net,
            novelty_inputs,
            np.zeros(len(novelty_inputs)),
            source=NEW_WORLD,
            id_prefix=NEW_WORLD,
            tags=(NOVELTY_TAG,),
        )
        cat = _nonempty(NEW_WORLD, traced)
        if cat:
            categories.append(cat)
    return categories


def tpr(model: MonitorModel, category: OmsCategory) -> float:
    """Fraction of the category's samples that raise an alarm."""
    if not category.samples.samples:
        raise EmptyCategory(f"category {category.name!r} has no samples")
    alarms = sum(
        1 for s in category.samples.samples if evaluate(model, s).decision == ALARM
    )
    return alarms / len(category.samples.samples)


# --- reporting -------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    categories: tuple[str, ...]
    labels: tuple[str, ...]
    tprs: dict  # label -> {category -> tpr}
    counts: dict  # category -> sample count
    acceptance: dict  # label -> calibration acceptance rate


def report(
    results: list[tuple[str, dict[str, float]]],
    counts: dict[str, int] | None = None,
    acceptance: dict[str, float] | None = None,
) -> EvalReport:
    """Bundle per-monitor TPRs into one report; columns are monitors."""
    labels = tuple(label for label, _ in results)
    if len(set(labels)) != len(labels):
        raise InvalidParameter("duplicate monitor labels in report")
    categories: tuple[str, ...] = ()
    if results:
        categories = tuple(results[0][1])
        for label, tprs in results[1:]:
            if set(tprs) != set(categories):
                raise InvalidParameter(f"monitor {label!r} reports different categories")
    elif counts:
        categories = tuple(counts)
    return EvalReport(
        categories=categories,
        labels=labels,
        tprs={label: dict(row) for label, row in results},
        counts=dict(counts or {}),
        acceptance=dict(acceptance or {}),
    )


def render_csv(rep: EvalReport) -> str:
    """Percentage table, 2 decimals, one row per category."""
    out = StringIO()
    out.write(",".join(["category", *rep.labels]) + "\n")
    for cat in rep.categories:
        cells = [f"{rep.tprs[label][cat] * 100:.2f}" for label in rep.labels]
        out.write(",".join([cat, *cells]) + "\n")
    return out.getvalue()


def render_text(rep: EvalReport) -> str:
    """Aligned text table of TPR percentages."""
    headers = ["category", *rep.labels]
    rows = [
        [cat, *(f"{rep.tprs[label][cat] * 100:.2f}" for label in rep.labels)]
        for cat in rep.categories
    ]
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in rows)) if rows else len(headers[i])
        for i in range(len(headers))
    ]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    for r in rows:
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(r)))
    return "\n".join(lines) + "\n"


def load_report_csv(path: str | Path) -> tuple[tuple[str, ...], dict[str, dict[str, float]]]:
    """Read a rendered CSV back as (labels, {label: {category: tpr}})."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise InvalidParameter(f"report file {path} is empty")
    header = lines[0].split(",")
    if header[:1] != ["category"]:
        raise InvalidParameter(f"report file {path}: first column must be 'category'")
    labels = tuple(header[1:])
    rows: dict[str, dict[str, float]] = {label: {} for label in labels}
    for line in lines[1:]:
        cells = line.split(",")
        for label, cell in zip(labels, cells[1:]):
            rows[label][cells[0]] = float(cell) / 100.0
    return labels, rows
