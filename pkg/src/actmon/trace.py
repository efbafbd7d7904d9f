"""Activation-trace data model and JSONL file format.

A trace file decouples monitor training from whatever produced the
activations: any framework that can dump per-layer vectors to JSON Lines can
feed the monitors. Line 1 is a meta record (class count, layer inventory),
every following line is one classified sample with its recorded vectors.
Files may optionally be gzip-compressed; compression is detected from the
magic bytes, not the file name.
"""

from __future__ import annotations

import gzip
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidFractions, ParseError, SchemaError

PRE_ACTIVATION = "pre_activation"
ACTIVATION = "activation"
QUANTITIES = (PRE_ACTIVATION, ACTIVATION)

_GZIP_MAGIC = b"\x1f\x8b"
_LAYER_NAME_RE = re.compile(r"^([ZA])(\d+)$")


@dataclass(frozen=True)
class LayerSpec:
    """One recorded layer: its name, width and which quantity was captured."""

    name: str
    dim: int
    quantity: str = PRE_ACTIVATION

    def __post_init__(self):
        if self.dim < 1:
            raise SchemaError(f"layer {self.name!r}: dim must be >= 1, got {self.dim}")
        if self.quantity not in QUANTITIES:
            raise SchemaError(
                f"layer {self.name!r}: quantity must be one of {QUANTITIES}, "
                f"got {self.quantity!r}"
            )


@dataclass(frozen=True)
class TraceMeta:
    """Header of a trace set: label count and the ordered layer inventory."""

    class_count: int
    layers: tuple[LayerSpec, ...]
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.class_count < 2:
            raise SchemaError(f"class_count must be >= 2, got {self.class_count}")
        names = [layer.name for layer in self.layers]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate layer names in meta: {names}")

    def layer(self, name: str) -> LayerSpec:
        for spec in self.layers:
            if spec.name == name:
                return spec
        raise SchemaError(f"no layer named {name!r} in meta")

    @property
    def layer_names(self) -> list[str]:
        return [layer.name for layer in self.layers]


@dataclass
class TraceSample:
    """One classified input: labels plus its per-layer recorded vectors.

    Correctness is always derived (true_label == pred_label), never stored.
    """

    id: str
    true_label: int
    pred_label: int
    vectors: dict[str, np.ndarray]
    tags: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        self.vectors = {
            name: np.asarray(vec, dtype=np.float64)
            for name, vec in self.vectors.items()
        }
        self.tags = frozenset(self.tags)

    @property
    def correct(self) -> bool:
        return self.true_label == self.pred_label


@dataclass
class TraceSet:
    """A validated collection of samples conforming to one meta header."""

    meta: TraceMeta
    samples: list[TraceSample]

    def __post_init__(self):
        for sample in self.samples:
            _check_sample(self.meta, sample)

    def __len__(self) -> int:
        return len(self.samples)

    def vectors_for(self, layer: str) -> np.ndarray:
        """All sample vectors of one layer stacked into an (n, dim) array."""
        spec = self.meta.layer(layer)
        if not self.samples:
            return np.empty((0, spec.dim))
        return np.stack([s.vectors[layer] for s in self.samples])

    def true_labels(self) -> np.ndarray:
        return np.array([s.true_label for s in self.samples], dtype=np.int64)

    def pred_labels(self) -> np.ndarray:
        return np.array([s.pred_label for s in self.samples], dtype=np.int64)


def _check_sample(meta: TraceMeta, sample: TraceSample) -> None:
    for label_kind in ("true_label", "pred_label"):
        label = getattr(sample, label_kind)
        if not 0 <= label < meta.class_count:
            raise SchemaError(
                f"sample {sample.id!r}: {label_kind} {label} outside "
                f"[0, {meta.class_count})"
            )
    expected = {spec.name for spec in meta.layers}
    present = set(sample.vectors)
    if present != expected:
        raise SchemaError(
            f"sample {sample.id!r}: layers {sorted(present)} do not match "
            f"meta layers {sorted(expected)}"
        )
    for spec in meta.layers:
        vec = sample.vectors[spec.name]
        if vec.ndim != 1 or vec.shape[0] != spec.dim:
            raise SchemaError(
                f"sample {sample.id!r}: layer {spec.name!r} has shape "
                f"{vec.shape}, expected ({spec.dim},)"
            )


def parse_layer_name(name: str) -> tuple[int, str]:
    """Split a layer name like 'Z13' or 'A12' into (level, quantity).

    Level numbering starts at the input: level 1 is the network input, so
    'A1' denotes the raw input vector and 'Z2' the first dense layer's
    pre-activations.
    """
    match = _LAYER_NAME_RE.match(name)
    if match is None:
        raise SchemaError(f"layer name {name!r} does not match Z<level>/A<level>")
    prefix, level = match.groups()
    quantity = PRE_ACTIVATION if prefix == "Z" else ACTIVATION
    return int(level), quantity


def make_layer_name(level: int, quantity: str) -> str:
    """Inverse of parse_layer_name."""
    if level < 1:
        raise SchemaError(f"layer level must be >= 1, got {level}")
    if quantity not in QUANTITIES:
        raise SchemaError(f"unknown quantity {quantity!r}")
    return ("Z" if quantity == PRE_ACTIVATION else "A") + str(level)


# --- serialization ---------------------------------------------------------


def _meta_to_record(meta: TraceMeta) -> dict:
    return {
        "kind": "meta",
        "class_count": meta.class_count,
        "layers": [
            {"name": s.name, "dim": s.dim, "quantity": s.quantity}
            for s in meta.layers
        ],
        "source": meta.source,
    }


def _sample_to_record(meta: TraceMeta, sample: TraceSample) -> dict:
    return {
        "kind": "sample",
        "id": sample.id,
        "true_label": sample.true_label,
        "pred_label": sample.pred_label,
        "tags": sorted(sample.tags),
        "vectors": {
            spec.name: sample.vectors[spec.name].tolist() for spec in meta.layers
        },
    }


def save_traces(trace_set: TraceSet, path: str | Path) -> None:
    """Write a trace set as JSONL; gzip-compressed when the name ends in .gz.

    Output is byte-deterministic: fixed field order, tags sorted, floats as
    the shortest decimal that round-trips the IEEE-754 double, gzip header
    with zeroed mtime.
    """
    path = Path(path)
    lines = [json.dumps(_meta_to_record(trace_set.meta), separators=(",", ":"))]
    for sample in trace_set.samples:
        lines.append(
            json.dumps(_sample_to_record(trace_set.meta, sample), separators=(",", ":"))
        )
    payload = ("\n".join(lines) + "\n").encode("utf-8")
    if path.suffix == ".gz":
        buf = io.BytesIO()
        with gzip.GzipFile(fileobj=buf, mode="wb", mtime=0) as zf:
            zf.write(payload)
        payload = buf.getvalue()
    path.write_bytes(payload)


def _record_field(record: dict, key: str, lineno: int):
    try:
        return record[key]
    except KeyError:
        raise ParseError(f"line {lineno}: missing field {key!r}") from None


def load_traces(path: str | Path) -> TraceSet:
    """Read and validate a trace file written by :func:`save_traces`."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == _GZIP_MAGIC:
        raw = gzip.decompress(raw)
    text = raw.decode("utf-8")

    meta: TraceMeta | None = None
    samples: list[TraceSample] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as err:
            raise ParseError(f"line {lineno}: malformed JSON ({err.msg})") from err
        if not isinstance(record, dict):
            raise ParseError(f"line {lineno}: expected an object")
        kind = _record_field(record, "kind", lineno)
        if meta is None:
            if kind != "meta":
                raise ParseError(f"line {lineno}: first record must have kind 'meta'")
            layers = tuple(
                LayerSpec(
                    name=_record_field(spec, "name", lineno),
                    dim=_record_field(spec, "dim", lineno),
                    quantity=_record_field(spec, "quantity", lineno),
                )
                for spec in _record_field(record, "layers", lineno)
            )
            meta = TraceMeta(
                class_count=_record_field(record, "class_count", lineno),
                layers=layers,
                source=record.get("source", ""),
            )
            continue
        if kind != "sample":
            raise ParseError(f"line {lineno}: unknown record kind {kind!r}")
        sample = TraceSample(
            id=_record_field(record, "id", lineno),
            true_label=_record_field(record, "true_label", lineno),
            pred_label=_record_field(record, "pred_label", lineno),
            vectors=_record_field(record, "vectors", lineno),
            tags=frozenset(record.get("tags", [])),
        )
        _check_sample(meta, sample)
        samples.append(sample)
    if meta is None:
        raise ParseError("file contains no meta record")
    return TraceSet(meta=meta, samples=samples)


# --- set operations --------------------------------------------------------


def filter_correct(trace_set: TraceSet) -> TraceSet:
    """Keep exactly the samples whose prediction matches the true label."""
    return TraceSet(
        meta=trace_set.meta,
        samples=[s for s in trace_set.samples if s.correct],
    )


def split(trace_set: TraceSet, fractions: list[float], seed: int) -> list[TraceSet]:
    """Partition a trace set into parts with the given fractions.

    The split is stratified by true_label and deterministic for a fixed
    seed. Within every class, part c receives its fraction of the class
    rounded to an integer, and the rounding is balanced so that both the
    per-class counts and the total part sizes stay within one sample of the
    exact fractional quota.
    """
    fracs = np.asarray(fractions, dtype=np.float64)
    if fracs.size == 0 or np.any(fracs <= 0):
        raise InvalidFractions(f"fractions must be positive, got {fractions}")
    if abs(fracs.sum() - 1.0) > 1e-9:
        raise InvalidFractions(f"fractions must sum to 1, got sum {fracs.sum()!r}")
    if not trace_set.samples:
        raise InvalidFractions("cannot split an empty trace set")

    rng = np.random.default_rng(seed)
    by_class: dict[int, list[int]] = {}
    for idx, sample in enumerate(trace_set.samples):
        by_class.setdefault(sample.true_label, []).append(idx)
    classes = sorted(by_class)
    for label in classes:
        rng.shuffle(by_class[label])

    counts = {label: len(by_class[label]) for label in classes}
    alloc = _balanced_allocation(
        rows=[counts[label] for label in classes], fractions=fracs
    )

    parts: list[list[TraceSample]] = [[] for _ in fracs]
    for row, label in enumerate(classes):
        pool = by_class[label]
        offset = 0
        for part_idx in range(len(fracs)):
            take = alloc[row][part_idx]
            for sample_idx in pool[offset : offset + take]:
                parts[part_idx].append(trace_set.samples[sample_idx])
            offset += take
    return [TraceSet(meta=trace_set.meta, samples=part) for part in parts]


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    """Round nonnegative quotas to integers summing to total, each within 1."""
    base = np.floor(quotas).astype(np.int64)
    remainder = int(total - base.sum())
    # ties go to the lower index via stable sort on the negated fraction
    order = np.argsort(-(quotas - base), kind="stable")
    base[order[:remainder]] += 1
    return base


def _balanced_allocation(rows: list[int], fractions: np.ndarray) -> list[list[int]]:
    """Integer allocation of per-class counts across parts.

    Starts from a per-class largest-remainder rounding (per-class deviation
    < 1 by construction), then moves single samples between parts until each
    part's total matches the largest-remainder rounding of its global quota.
    Moves only happen where they keep every cell between the floor and the
    ceiling of its exact quota, so the per-class guarantee survives.
    """
    n = sum(rows)
    n_parts = len(fractions)
    targets = _largest_remainder(fractions * n, n)

    quotas = [fractions * count for count in rows]
    alloc = [list(_largest_remainder(q, count)) for q, count in zip(quotas, rows)]

    def column_sums() -> list[int]:
        return [sum(alloc[r][c] for r in range(len(rows))) for c in range(n_parts)]

    sums = column_sums()
    guard = 0
    while sums != list(targets):
        guard += 1
        if guard > n_parts * len(rows) * 4 + 16:
            raise RuntimeError("split allocation failed to balance")
        over = next(c for c in range(n_parts) if sums[c] > targets[c])
        # BFS over columns; an edge i -> j means some class can donate one
        # sample from part i to part j without leaving its floor/ceil band.
        parent: dict[int, tuple[int, int]] = {}
        frontier = [over]
        seen = {over}
        goal = None
        while frontier and goal is None:
            nxt = []
            for col in frontier:
                for dst in range(n_parts):
                    if dst in seen:
                        continue
                    row = _movable_row(alloc, quotas, col, dst)
                    if row is None:
                        continue
                    parent[dst] = (col, row)
                    if sums[dst] < targets[dst]:
                        goal = dst
                        break
                    seen.add(dst)
                    nxt.append(dst)
                if goal is not None:
                    break
            frontier = nxt
        if goal is None:
            raise RuntimeError("split allocation found no balancing move")
        col = goal
        while col != over:
            src, row = parent[col]
            alloc[row][src] -= 1
            alloc[row][col] += 1
            col = src
        sums = column_sums()
    return alloc


def _movable_row(alloc, quotas, src: int, dst: int):
    for row in range(len(alloc)):
        lo_src = int(np.floor(quotas[row][src]))
        hi_dst = int(np.ceil(quotas[row][dst]))
        if alloc[row][src] - 1 >= lo_src and alloc[row][dst] + 1 <= hi_dst:
            return row
    return None
