import json

import pytest

from aslsl.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_generate_inject_fit_rank_evaluate(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ASLSL_OUTPUT_DIR", str(tmp_path / "default"))
    code, out, _ = run(capsys, "generate", "--n", 40, "--dims", "8,6", "--k", 2,
                       "--informative", 2, "--out", tmp_path / "d")
    assert code == 0
    manifest = json.loads(out)["manifest"]
    code, out, _ = run(capsys, "inject", "--manifest", manifest, "--ratio", 0.25,
                       "--out", tmp_path / "m")
    assert json.loads(out)["absent_per_view"] == [10, 10]
    manifest = str(tmp_path / "m" / "manifest.json")
    code, out, _ = run(capsys, "fit", "--manifest", manifest, "--max-iters", 20,
                       "--out", tmp_path / "f")
    assert code == 0 and json.loads(out)["iterations"] == 20
    code, out, _ = run(capsys, "rank", "--model", tmp_path / "f" / "model.npz",
                       "--out", tmp_path / "r.csv")
    assert json.loads(out)["features"] == 14
    code, out, _ = run(capsys, "evaluate", "--manifest", manifest, "--ranking",
                       tmp_path / "r.csv", "--fraction", 0.5, "--mlknn-k", 3)
    assert code == 0 and 0 <= json.loads(out)["average_precision"] <= 1
    saved = json.loads((tmp_path / "default" / "evaluation.json").read_text())
    assert saved == json.loads(out)


def test_fatal_error_is_json_on_stderr(tmp_path, capsys):
    code, out, err = run(capsys, "evaluate", "--manifest", tmp_path / "missing.json")
    assert code != 0 and out == ""
    assert json.loads(err)["error"] == "DatasetError"


def test_run_flags_override_config(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ASLSL_OUTPUT_DIR", str(tmp_path / "default"))
    cfg = {"synthetic": {"n": 40, "m": 2, "k": 2, "dims": [6, 6], "informative_per_view": 2},
           "missing_ratios": [0.1], "lam": [1], "eta": [1], "delta": [1], "gamma": [2],
           "trials": 5, "max_iters": 10, "mlknn_k": 3}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "run", "--config", path, "--trials", 2)
    result = json.loads(out)
    assert code == 0 and result["cells"] == 2 and result["failed"] == 0
    assert (tmp_path / "default" / "metrics.csv").exists()


def test_sweep_writes_table(tmp_path, capsys):
    cfg = {"synthetic": {"n": 40, "m": 2, "k": 2, "dims": [6, 6], "informative_per_view": 2},
           "missing_ratios": [0.1], "trials": 1, "max_iters": 5, "mlknn_k": 3}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "sweep", "--config", path, "--lam", "0.1,1",
                       "--eta", "0.1,1", "--delta", "0.1,1", "--gamma", "2,3",
                       "--out", tmp_path / "s")
    assert code == 0
    assert json.loads(out)["rows"] == 4 * 3 + 4  # three 2x2 panels plus gamma x lam
    assert (tmp_path / "s" / "sensitivity.csv").exists()


def test_unknown_verb_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["nope"])
    assert exc.value.code != 0
