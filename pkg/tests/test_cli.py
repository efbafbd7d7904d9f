import json

import pytest

from actmon import cli, monitors, selection, trace


def run(argv):
    return cli.main([str(a) for a in argv])


def test_help_exits_zero():
    for argv in (
        ["--help"],
        ["synth", "--help"],
        ["train", "--help"],
        ["calibrate", "--help"],
        ["select", "--help"],
        ["evaluate", "--help"],
        ["report", "--help"],
    ):
        with pytest.raises(SystemExit) as exc:
            run(argv)
        assert exc.value.code == 0


def test_missing_required_flag_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(["train", "--traces", tmp_path / "x.jsonl"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run(["select", "--traces", tmp_path / "x.jsonl", "--fraction", 0.5, "--out", tmp_path / "m"])
    assert exc.value.code == 2  # original_nn scorer needs --net


def test_bad_input_file_is_runtime_error(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("not json\n")
    code = run(["train", "--traces", bad, "--out", tmp_path / "m.json"])
    assert code == 1
    assert capsys.readouterr().err.startswith("ParseError:")


def synth_dir(tmp_path, name="task", **over):
    out = tmp_path / name
    args = {
        "classes": 3,
        "dim": 2,
        "modes": 3,
        "samples": 900,
        "separation": 3.0,
        "seed": 7,
        "novelty": 50,
        "perturb": "invert",
    }
    args.update(over)
    argv = ["synth", "--out", out]
    for key, val in args.items():
        argv += [f"--{key}", val]
    assert run(argv) == 0
    return out


def test_synth_writes_expected_files(tmp_path, capsys):
    out = synth_dir(tmp_path)
    captured = capsys.readouterr().out
    assert captured.startswith("test_accuracy ")
    names = {p.name for p in out.iterdir()}
    assert {"net.json", "train.jsonl", "calib.jsonl", "test.jsonl"} <= names
    assert "oms_wrong_id.jsonl" in names
    assert "oms_new_world.jsonl" in names


def test_synth_is_byte_deterministic(tmp_path):
    a = synth_dir(tmp_path, "a")
    b = synth_dir(tmp_path, "b")
    for name in ("net.json", "train.jsonl", "test.jsonl", "oms_wrong_id.jsonl"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_full_pipeline(tmp_path, capsys):
    out = synth_dir(tmp_path)
    capsys.readouterr()

    model = tmp_path / "model.json"
    assert run([
        "train", "--traces", out / "train.jsonl", "--kind", "clustered_gaussian",
        "--k", 3, "--out", model,
    ]) == 0

    calibrated = tmp_path / "calibrated.json"
    assert run([
        "calibrate", "--model", model, "--traces", out / "calib.jsonl", "--out", calibrated,
    ]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("threshold ")
    acceptance = float(lines[1].split()[1])
    assert acceptance >= 0.9

    mask_path = tmp_path / "mask.json"
    assert run([
        "select", "--traces", out / "train.jsonl", "--net", out / "net.json",
        "--layer", "Z3", "--fraction", 0.25, "--out", mask_path,
        "--scores", tmp_path / "scores.json",
    ]) == 0
    mask = selection.load_mask(mask_path)
    assert [len(row) for row in mask.per_class] == [4, 4, 4]  # ceil(0.25 * 16)
    table = selection.load_scores(tmp_path / "scores.json")
    assert table.layer == "Z3"

    verdict_dir = tmp_path / "verdicts"
    csv_path = tmp_path / "clustered.csv"
    assert run([
        "evaluate", "--model", calibrated,
        "--traces", out / "oms_wrong_id.jsonl", out / "oms_new_world.jsonl",
        "--out-dir", verdict_dir, "--csv", csv_path, "--label", "clustered",
    ]) == 0
    eval_out = capsys.readouterr().out.splitlines()
    assert eval_out[0].startswith("wrong_id samples ")
    assert eval_out[1].startswith("new_world samples ")

    verdicts = (verdict_dir / "oms_wrong_id.verdicts.jsonl").read_text().splitlines()
    wrong = trace.load_traces(out / "oms_wrong_id.jsonl")
    assert len(verdicts) == len(wrong.samples)
    first = json.loads(verdicts[0])
    assert first["id"] == wrong.samples[0].id
    assert first["decision"] in (monitors.ACCEPT, monitors.ALARM)

    assert run(["report", csv_path, "--csv", tmp_path / "merged.csv"]) == 0
    text = capsys.readouterr().out
    assert "clustered" in text and "wrong_id" in text
    merged = (tmp_path / "merged.csv").read_text()
    assert merged.splitlines()[0] == "category,clustered"


def test_masked_train_round_trip(tmp_path, capsys):
    out = synth_dir(tmp_path)
    mask_path = tmp_path / "mask.json"
    run([
        "select", "--traces", out / "train.jsonl", "--net", out / "net.json",
        "--layer", "Z3", "--fraction", 0.25, "--out", mask_path,
    ])
    model = tmp_path / "masked.json"
    assert run([
        "train", "--traces", out / "train.jsonl", "--kind", "gaussian",
        "--mask", mask_path, "--out", model,
    ]) == 0
    loaded = monitors.load_model(model)
    assert loaded.config.mask is not None
    assert [len(r) for r in loaded.monitored_neurons] == [4, 4, 4]
    capsys.readouterr()


def test_select_monitoring_nn_scorer(tmp_path, capsys):
    out = synth_dir(tmp_path, samples=600)
    mask_path = tmp_path / "mask.json"
    assert run([
        "select", "--traces", out / "train.jsonl", "--scorer", "monitoring_nn",
        "--layer", "Z3", "--fraction", 0.5, "--epochs", 30, "--out", mask_path,
    ]) == 0
    mask = selection.load_mask(mask_path)
    assert [len(row) for row in mask.per_class] == [8, 8, 8]
    capsys.readouterr()


def test_report_merges_in_input_order(tmp_path, capsys):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("category,plain\nwrong_id,17.71\nnew_world,99.00\n")
    b.write_text("category,clustered\nwrong_id,23.96\nnew_world,100.00\n")
    assert run(["report", b, a, "--csv", tmp_path / "m.csv"]) == 0
    capsys.readouterr()
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "category,clustered,plain"


def test_evaluate_rejects_uncalibrated_model(tmp_path, capsys):
    out = synth_dir(tmp_path, samples=600)
    model = tmp_path / "model.json"
    run(["train", "--traces", out / "train.jsonl", "--out", model])
    code = run(["evaluate", "--model", model, "--traces", out / "oms_wrong_id.jsonl"])
    assert code == 1
    assert "InvalidParameter" in capsys.readouterr().err
