"""Command-line front end.

Subcommands cover the full monitoring pipeline:

  synth       generate a synthetic task: net file + trace files (train,
              calib, test, OMS categories)
  train       fit an uncalibrated monitor from a training trace file
  calibrate   set the monitor threshold from a calibration trace file
  select      score neurons and write a selection mask
  evaluate    run a calibrated monitor over trace files, emit verdicts
  report      merge per-monitor report CSVs into one table

Exit codes: 0 success, 1 runtime error (printed as `ErrorKind: message`
on stderr), 2 usage error. All randomness is funneled through --seed so
identical invocations produce identical output bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import evaluation, monitors, nn, selection, trace
from .errors import ActmonError

DEFAULT_PERTURBATIONS = "gaussian_noise:2,invert,contrast:3"


def _parse_perturbations(text: str) -> list[tuple[str, float | None]]:
    grid: list[tuple[str, float | None]] = []
    if not text:
        return grid
    for part in text.split(","):
        if ":" in part:
            kind, raw = part.split(":", 1)
            grid.append((kind, float(raw)))
        else:
            grid.append((part, None))
    return grid


def _hidden_layer_index(net: nn.NeuralNet, layer: str) -> tuple[int, str]:
    level, quantity = trace.parse_layer_name(layer)
    index = level - 2
    if not 0 <= index < len(net.layers) - 1:
        raise ActmonError(
            f"layer {layer!r} is not a hidden layer of the given net"
        )
    return index, quantity


def cmd_synth(args: argparse.Namespace) -> int:
    spec = evaluation.TaskSpec(
        classes=args.classes,
        input_dim=args.dim,
        modes_per_class=args.modes,
        samples=args.samples,
        seed=args.seed,
        separation=args.separation,
    )
    task = evaluation.make_synthetic_task(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    nn.save_net(task.net, out / "net.json")
    trace.save_traces(task.train, out / "train.jsonl")
    trace.save_traces(task.calib, out / "calib.jsonl")
    trace.save_traces(task.test, out / "test.jsonl")

    rng = np.random.default_rng(spec.seed + 1)
    far_corner = np.full(spec.input_dim, -3.0 * spec.separation)
    novelty = far_corner + rng.standard_normal((args.novelty, spec.input_dim))
    categories = evaluation.build_oms_sets(
        task.net,
        evaluation.raw_inputs(task.test),
        task.test.true_labels(),
        novelty_inputs=novelty,
        perturbation_grid=_parse_perturbations(args.perturb),
        seed=spec.seed + 2,
    )
    for cat in categories:
        trace.save_traces(cat.samples, out / f"oms_{cat.name}.jsonl")
    print(f"test_accuracy {task.test_accuracy:.4f}")
    print(f"categories {' '.join(c.name for c in categories)}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    traces = trace.load_traces(args.traces)
    mask = selection.load_mask(args.mask) if args.mask else None
    config = monitors.MonitorConfig(
        layer=args.layer,
        kind=args.kind,
        clusters_per_class=args.k,
        kappa=args.kappa,
        gamma=args.gamma,
        ridge=args.ridge,
        mask=mask,
    )
    model = monitors.train_monitor(config, trace.filter_correct(traces), seed=args.seed)
    monitors.save_model(model, args.out)
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    model = monitors.load_model(args.model)
    calib = trace.filter_correct(trace.load_traces(args.traces))
    calibrated = monitors.calibrate(model, calib, target_accept=args.target_accept)
    monitors.save_model(calibrated, args.out)
    accepted = sum(
        1
        for s in calib.samples
        if monitors.evaluate(calibrated, s).decision == monitors.ACCEPT
    )
    print(f"threshold {calibrated.threshold.value:.6g}")
    print(f"calibration_acceptance {accepted / len(calib.samples):.4f}")
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    traces = trace.load_traces(args.traces)
    if args.scorer == selection.ORIGINAL_NN:
        net = nn.load_net(args.net)
        index, quantity = _hidden_layer_index(net, args.layer)
        correct = trace.filter_correct(traces)
        safe: list[list[np.ndarray]] = [[] for _ in range(traces.meta.class_count)]
        for s in correct.samples:
            safe[s.true_label].append(s.vectors["A1"])
        table = selection.abs_scores(net, safe, index, quantity)
    else:
        nets = [
            selection.train_monitoring_nn(
                traces,
                args.layer,
                c,
                hyper=nn.TrainConfig(epochs=args.epochs, batch_size=16, seed=args.seed + c),
            )
            for c in range(traces.meta.class_count)
        ]
        table = selection.abs_scores_via_monitoring_nn(nets, traces, args.layer)
    mask = selection.select_top_fraction(table, args.fraction)
    selection.save_mask(mask, args.out)
    if args.scores:
        selection.save_scores(table, args.scores)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    model = monitors.load_model(args.model)
    rows: dict[str, float] = {}
    for path in args.traces:
        traces = trace.load_traces(path)
        name = traces.meta.source or Path(path).stem
        verdicts = [monitors.evaluate(model, s) for s in traces.samples]
        alarms = sum(1 for v in verdicts if v.decision == monitors.ALARM)
        rows[name] = alarms / len(verdicts) if verdicts else 0.0
        if args.out_dir:
            out_dir = Path(args.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            lines = [
                json.dumps(
                    {
                        "id": s.id,
                        "decision": v.decision,
                        "score": v.score,
                        "best_cluster": v.best_cluster,
                    },
                    separators=(",", ":"),
                )
                for s, v in zip(traces.samples, verdicts)
            ]
            (out_dir / f"{Path(path).stem}.verdicts.jsonl").write_text(
                "\n".join(lines) + "\n"
            )
        print(f"{name} samples {len(verdicts)} alarms {alarms} tpr {rows[name]:.4f}")
    if args.csv:
        rep = evaluation.report([(args.label, rows)])
        Path(args.csv).write_text(evaluation.render_csv(rep))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    merged: list[tuple[str, dict[str, float]]] = []
    for path in args.csv_files:
        labels, rows = evaluation.load_report_csv(path)
        for label in labels:
            merged.append((label, rows[label]))
    rep = evaluation.report(merged)
    sys.stdout.write(evaluation.render_text(rep))
    if args.csv:
        Path(args.csv).write_text(evaluation.render_csv(rep))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actmon",
        description="Train, calibrate and evaluate activation monitors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic task and traces")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--modes", type=int, default=1, help="Gaussian modes per class")
    p.add_argument("--samples", type=int, default=3000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--separation", type=float, default=8.0)
    p.add_argument("--novelty", type=int, default=200, help="novelty sample count")
    p.add_argument(
        "--perturb",
        default=DEFAULT_PERTURBATIONS,
        help="comma list of kind or kind:param entries",
    )
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train an uncalibrated monitor")
    p.add_argument("--traces", required=True)
    p.add_argument("--layer", default="Z3", help="monitored layer name")
    p.add_argument("--kind", default=monitors.CLUSTERED_GAUSSIAN, choices=monitors.KINDS)
    p.add_argument("--k", type=int, default=1, help="clusters per class")
    p.add_argument("--kappa", type=float, default=2.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--ridge", type=float, default=1e-6)
    p.add_argument("--mask", help="selection mask JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", help="set the monitor threshold")
    p.add_argument("--model", required=True)
    p.add_argument("--traces", required=True)
    p.add_argument("--target-accept", type=float, default=0.90)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("select", help="score neurons, write a selection mask")
    p.add_argument("--traces", required=True)
    p.add_argument("--net", help="net JSON (original_nn scorer)")
    p.add_argument("--layer", default="Z3")
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--scorer", default=selection.ORIGINAL_NN, choices=selection.SCORERS)
    p.add_argument("--epochs", type=int, default=200, help="monitoring-NN epochs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scores", help="also write the score table JSON here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evaluate", help="run a calibrated monitor over traces")
    p.add_argument("--model", required=True)
    p.add_argument("--traces", nargs="+", required=True)
    p.add_argument("--out-dir", help="write per-sample verdict JSONL files here")
    p.add_argument("--csv", help="write a one-monitor report CSV")
    p.add_argument("--label", default="monitor", help="column label for --csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="merge report CSVs into one table")
    p.add_argument("csv_files", nargs="+")
    p.add_argument("--csv", help="also write the merged table as CSV")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "select" and args.scorer == selection.ORIGINAL_NN and not args.net:
        _build_parser().error("--net is required with --scorer original_nn")
    try:
        return args.func(args)
    except ActmonError as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
