import filecmp
import json
import subprocess
import sys

import numpy as np
import pytest

from csiorient import archive
from csiorient.cli import main
from csiorient.experiment import format_report, summary_from_records
from csiorient.metrics import format_percent

SMALL = ["--S", "6", "--T", "64", "--aps", "3", "--users", "2", "--samples-per-cell", "5"]


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "data"
    assert main(["synth", "--out", str(out), "--seed", "7", "--noise-std", "0.5"] + SMALL) == 0
    return out


def _run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("cmd", ["synth", "train", "eval", "predict"])
def test_help(cmd):
    with pytest.raises(SystemExit) as e:
        main([cmd, "--help"])
    assert e.value.code == 0


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "csiorient", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    assert "synth" in r.stdout and "predict" in r.stdout


def test_synth_rerun_is_byte_identical(tmp_path, data):
    assert main(["synth", "--out", str(tmp_path / "again"), "--seed", "7", "--noise-std", "0.5"] + SMALL) == 0
    for sub in (".", "ap1", "ap2", "ap3"):
        d = filecmp.dircmp(data / sub, tmp_path / "again" / sub)
        _, mismatch, errors = filecmp.cmpfiles(data / sub, tmp_path / "again" / sub, d.common_files, shallow=False)
        assert not mismatch and not errors and not d.left_only and not d.right_only


def test_synth_paper_shape_counts(tmp_path, capsys):
    code, out, _ = _run(
        ["synth", "--paper-shape", "--seed", "7", "--S", "1", "--T", "16", "--out", str(tmp_path / "p")], capsys
    )
    assert code == 0
    manifest = json.loads((tmp_path / "p" / "manifest.json").read_text())
    assert len(manifest["samples"]) == 1920
    assert manifest["ap_ids"] == [1, 2, 3, 4, 5]
    for a in range(1, 6):
        assert len(list((tmp_path / "p" / f"ap{a}").iterdir())) == 1920


def test_synth_validation_error(tmp_path, capsys):
    code, _, err = _run(["synth", "--out", str(tmp_path / "x"), "--samples-per-cell", "0"], capsys)
    assert code != 0
    assert "samples_per_cell" in err


def test_train_sap(tmp_path, data, capsys):
    code, out, _ = _run(["train", "--data", str(data), "--topology", "sap", "--ap", "1", "--out", str(tmp_path / "m")], capsys)
    assert code == 0
    assert "alpha" in out and "s;" in out
    m = archive.load_model(tmp_path / "m").model
    assert len(m.banks) == 1
    assert len(m.activity_heads) + len(m.orientation_heads) == 2


def test_train_cmap_dimension(tmp_path, data, capsys):
    code, out, _ = _run(["train", "--data", str(data), "--topology", "cmap", "--ap", "1,2,3", "--out", str(tmp_path / "m")], capsys)
    assert code == 0
    assert archive.load_model(tmp_path / "m").model.head_input_dim == 3 * 9_996
    assert "29988" in out


def test_train_amap_single_ap_accepted(tmp_path, data, capsys):
    code, _, _ = _run(["train", "--data", str(data), "--topology", "amap", "--ap", "3", "--out", str(tmp_path / "m")], capsys)
    assert code == 0
    m = archive.load_model(tmp_path / "m").model
    assert m.topology == "amap" and m.ap_ids == (3,)


def test_train_inconsistent_flags(tmp_path, data, capsys):
    code, _, err = _run(["train", "--data", str(data), "--topology", "sap", "--ap", "1,2"], capsys)
    assert code == 2 and "sap" in err
    code, _, err = _run(["train", "--data", str(data), "--topology", "cmap", "--ap", "1,9"], capsys)
    assert code != 0 and "9" in err
    code, _, err = _run(["train", "--data", str(tmp_path / "none")], capsys)
    assert code != 0 and "manifest" in err
    code, _, err = _run(["train", "--data", str(data), "--topology", "star"], capsys)
    assert code != 0 and "star" in err


@pytest.fixture(scope="module")
def eval_once(data, tmp_path_factory):
    out = tmp_path_factory.mktemp("eval")
    args = ["eval", "--data", str(data), "--runs", "2", "--seed", "5", "--out", str(out / "a")]
    assert main(args) == 0
    args[-1] = str(out / "b")
    assert main(args) == 0
    return out


def test_eval_reports_are_reproducible(eval_once):
    for name in ("report.txt", "report.json"):
        a = (eval_once / "a" / name).read_bytes()
        b = (eval_once / "b" / name).read_bytes()
        # the only difference allowed is the recorded output directory
        assert a.replace(b"/a", b"/b") == b


def test_eval_report_shape(eval_once):
    result = json.loads((eval_once / "a" / "report.json").read_text())
    labels = [r["label"] for r in result["rows"]]
    assert labels == ["SAP - AP 1", "SAP - AP 2", "SAP - AP 3", "AMAP", "CMAP"]
    text = (eval_once / "a" / "report.txt").read_text()
    cmap_line = next(line for line in text.splitlines() if line.startswith("CMAP"))
    assert cmap_line.count("±") == 8
    assert text == format_report(result)


def test_eval_json_reaggregates_to_printed_means(eval_once):
    result = json.loads((eval_once / "a" / "report.json").read_text())
    again = summary_from_records(result)
    for row in result["rows"]:
        for task in ("activity", "orientation"):
            for m in ("acc", "bacc", "f1_macro", "mcc"):
                assert abs(again[row["label"]][task][m]["mean"] - row["summary"][task][m]["mean"]) <= 1e-9
                # and from the raw per-run numbers, by hand
                vals = [r[task][m] for r in row["runs"]]
                assert abs(np.mean(vals) - row["summary"][task][m]["mean"]) <= 1e-9
    # the per-sample log reproduces each run's accuracy
    for label, runs in result["predictions"].items():
        row = next(r for r in result["rows"] if r["label"] == label)
        for run, rec in zip(row["runs"], runs):
            acc = np.mean([s["activity"] == s["pred_activity"] for s in rec["samples"]])
            assert abs(acc - run["activity"]["acc"]) <= 1e-12


def test_eval_single_run_has_zero_std(tmp_path, data, capsys):
    code, out, _ = _run(
        ["eval", "--data", str(data), "--runs", "1", "--topology", "cmap", "--out", str(tmp_path)], capsys
    )
    assert code == 0
    result = json.loads((tmp_path / "report.json").read_text())
    summary = result["rows"][0]["summary"]
    for task in ("activity", "orientation"):
        for m in ("acc", "bacc", "f1_macro", "mcc"):
            assert summary[task][m]["std"] == 0.0
            assert format_percent(summary[task][m]).endswith("±0.0")


def test_eval_parallel_runs_same_report(tmp_path, data):
    base = ["eval", "--data", str(data), "--runs", "2", "--topology", "sap", "--ap", "2"]
    assert main(base + ["--out", str(tmp_path / "s")]) == 0
    assert main(base + ["--out", str(tmp_path / "p"), "--parallel-runs", "2"]) == 0
    a = json.loads((tmp_path / "s" / "report.json").read_text())
    b = json.loads((tmp_path / "p" / "report.json").read_text())
    a["config"].pop("output"), b["config"].pop("output")
    assert a == b


def test_predict_matches_eval_log(tmp_path, data, capsys):
    common = ["--data", str(data), "--topology", "sap", "--ap", "2", "--seed", "4"]
    assert main(["eval", *common, "--runs", "1", "--out", str(tmp_path / "r")]) == 0
    assert main(["train", *common, "--out", str(tmp_path / "m")]) == 0
    capsys.readouterr()
    result = json.loads((tmp_path / "r" / "report.json").read_text())
    log = result["predictions"]["SAP - AP 2"][0]["samples"]
    names_a, names_o = result["activity_names"], result["orientation_names"]
    for rec in log[:6]:
        path = data / "ap2" / f"{rec['sample_id']:05d}.txt"
        code, out, _ = _run(["predict", "--model", str(tmp_path / "m"), str(path)], capsys)
        assert code == 0
        assert f"activity: {names_a[rec['pred_activity']]}" in out
        assert f"orientation: {names_o[rec['pred_orientation']]}" in out
        assert "activity scores:" in out


def test_predict_errors(tmp_path, data, capsys):
    assert main(["train", "--data", str(data), "--topology", "cmap", "--out", str(tmp_path / "m")]) == 0
    capsys.readouterr()
    f = lambda a: f"{a}={data / f'ap{a}' / '00000.txt'}"
    code, out, _ = _run(["predict", "--model", str(tmp_path / "m"), f(1), f(2), f(3)], capsys)
    assert code == 0 and "orientation:" in out
    code, _, err = _run(["predict", "--model", str(tmp_path / "m"), f(1), f(3)], capsys)
    assert code == 2 and "missing ap_id [2]" in err
    blob = (tmp_path / "m").read_bytes()
    (tmp_path / "t").write_bytes(blob[: len(blob) // 3])
    code, _, err = _run(["predict", "--model", str(tmp_path / "t"), f(1), f(2), f(3)], capsys)
    assert code != 0 and "truncated" in err
    flipped = bytearray(blob)
    flipped[-10] ^= 0xFF
    (tmp_path / "c").write_bytes(bytes(flipped))
    code, _, err = _run(["predict", "--model", str(tmp_path / "c"), f(1), f(2), f(3)], capsys)
    assert code != 0 and "checksum" in err


def test_show_config(tmp_path, data, capsys):
    assert main(["train", "--data", str(data), "--topology", "amap", "--ap", "1,3", "--seed", "9",
                 "--alphas", "0.1,1", "--out", str(tmp_path / "m")]) == 0
    capsys.readouterr()
    code, out, _ = _run(["predict", "--model", str(tmp_path / "m"), "--show-config"], capsys)
    assert code == 0
    cfg = json.loads(out)
    assert cfg["topology"] == "amap" and cfg["ap_ids"] == [1, 3] and cfg["seed"] == 9
    assert cfg["alphas"] == [0.1, 1.0]
    # the emitted config is a valid --config input
    (tmp_path / "cfg.json").write_text(out)
    assert main(["train", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "m2")]) == 0
    a = archive.load_model(tmp_path / "m").model
    b = archive.load_model(tmp_path / "m2").model
    assert all(np.array_equal(x.weights, y.weights) for x, y in zip(a.activity_heads, b.activity_heads))
