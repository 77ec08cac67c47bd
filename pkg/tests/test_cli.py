import io
import json
import subprocess
import sys

import numpy as np
import pytest

from edgedfr.bench import read_csv
from edgedfr.cli import main


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def _stream(monkeypatch, capsys, args, text):
    monkeypatch.setattr(sys, "stdin", io.StringIO(text))
    code = main(["stream", *args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_generate(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["generate", "--task", "narma10", "--len", "4000", "--seed", "1", "-o", str(a)]) == 0
    assert main(["generate", "--task", "narma10", "--len", "4000", "--seed", "1", "-o", str(b)]) == 0
    assert len(a.read_text().splitlines()) == 4001
    assert a.read_bytes() == b.read_bytes()
    assert capsys.readouterr().out == ""


def test_generate_mackey_glass(tmp_path):
    p = tmp_path / "mg.csv"
    assert main(["generate", "--task", "mackey-glass", "--len", "300", "--horizon", "2", "-o", str(p)]) == 0
    ds = read_csv(p)
    assert np.array_equal(ds.targets[:-2], ds.inputs[2:])


def test_generate_too_short(tmp_path, capsys):
    assert main(["generate", "--task", "narma10", "--len", "10", "-o", str(tmp_path / "x.csv")]) == 1
    assert "T >= 20" in capsys.readouterr().err


def test_generate_io_failure(tmp_path, capsys):
    code = main(["generate", "--len", "100", "-o", str(tmp_path / "no" / "such" / "dir.csv")])
    assert code == 2 and "I/O" in capsys.readouterr().err


def test_eval_default_report(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"output": {"weights": str(tmp_path / "w.json")}})
    assert main(["eval", "--config", cfg]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["schema"] == 1 and report["metrics"]["nrmse"] < 0.6
    assert set(report) >= {"config", "metrics", "train_error_trace_summary", "duration_ms", "weights_path"}
    assert report["config"]["reservoir"]["n_virtual"] == 100  # defaults echoed
    weights = json.loads((tmp_path / "w.json").read_text())
    assert weights["length"] == 101 and report["weights_path"] == str(tmp_path / "w.json")


def test_eval_repeatable_and_to_file(tmp_path):
    cfg = _write(tmp_path / "c.json", {"reservoir": {"n_virtual": 20}, "task": {"length": 1000}})
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["eval", "--config", cfg, "--out", str(a)]) == 0
    assert main(["eval", "--config", cfg, "--out", str(b)]) == 0
    assert json.loads(a.read_text())["metrics"] == json.loads(b.read_text())["metrics"]


def test_eval_seed_override(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"reservoir": {"n_virtual": 10}, "task": {"length": 500}})
    assert main(["eval", "--config", cfg, "--seed", "9"]) == 0
    assert json.loads(capsys.readouterr().out)["config"]["task"]["seed"] == 9


def test_eval_quantized_needs_pwl(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"mode": "quantized"})
    assert main(["eval", "--config", cfg]) == 1
    err = capsys.readouterr()
    assert "piecewise-linear" in err.err and err.out == ""


def test_eval_divergence_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"reservoir": {"n_virtual": 5}, "task": {"length": 300},
                                        "trainer": {"kind": "lms", "step_size": 1e3}})
    assert main(["eval", "--config", cfg]) == 3
    assert "phase=train" in capsys.readouterr().err


def test_sweep_grid_and_determinism(tmp_path):
    cfg = _write(tmp_path / "s.json", {"task": {"length": 600},
                                       "sweep": {"n_virtual": [20, 10], "input_gain": [0.5, 0.25]}})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", cfg, "--threads", "2", "--no-timing", "-o", str(a)]) == 0
    assert main(["sweep", "--config", cfg, "--no-timing", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "n_virtual,input_gain,mse,nmse,nrmse,duration_ms,status"
    assert [tuple(l.split(",")[:2]) for l in lines[1:]] == [
        ("10", "0.25"), ("10", "0.5"), ("20", "0.25"), ("20", "0.5")]


def test_sweep_records_divergence_in_row(tmp_path, capsys):
    cfg = _write(tmp_path / "s.json", {"task": {"length": 300},
                                       "reservoir": {"n_virtual": 5, "feedback_gain": 0.99,
                                                     "nonlinearity": {"variant": "identity"}},
                                       "sweep": {"input_gain": [0.5, 1e308]}})
    assert main(["sweep", "--config", cfg]) == 0
    rows = capsys.readouterr().out.splitlines()[1:]
    assert rows[0].endswith(",ok") and rows[1].split(",")[-1] == "diverged"


def test_sweep_requires_axes(tmp_path):
    assert main(["sweep", "--config", _write(tmp_path / "s.json", {})]) == 1


def test_stream_zero_lines(monkeypatch, capsys):
    code, out, _ = _stream(monkeypatch, capsys, [], "0\n0\n0\n")
    assert code == 0 and out == "0\n0\n0\n"


def test_stream_skips_malformed_lines(monkeypatch, capsys):
    ref_code, ref, _ = _stream(monkeypatch, capsys, [], "0.1,0.2\n0.3\n")
    code, out, err = _stream(monkeypatch, capsys, [], "0.1,0.2\n\nbad\n1,2,3\nnan\n0.3\n")
    assert code == ref_code == 0 and out == ref
    assert err.count("skipped") == 3


def test_stream_checkpoint_resume_matches_uninterrupted(tmp_path, monkeypatch, capsys):
    cfg = _write(tmp_path / "c.json", {"reservoir": {"n_virtual": 20, "nonlinearity": {"variant": "pwl"}},
                                       "mode": "quantized", "trainer": {"kind": "lms"},
                                       "task": {"length": 400}})
    rng = np.random.default_rng(0)
    lines = [f"{u!r},{d!r}" for u, d in zip(rng.uniform(0, 0.5, 300).tolist(), rng.uniform(0, 1, 300).tolist())]
    lines += [repr(u) for u in rng.uniform(0, 0.5, 50).tolist()]
    _, full, err = _stream(monkeypatch, capsys, ["--config", cfg], "\n".join(lines) + "\n")
    assert err == "" and len(full.splitlines()) == 350 and any(float(v) != 0.0 for v in full.split())
    ck = str(tmp_path / "ck.json")
    _, first, _ = _stream(monkeypatch, capsys, ["--config", cfg, "-o", ck], "\n".join(lines[:137]) + "\n")
    _, second, _ = _stream(monkeypatch, capsys, ["--config", cfg, "--checkpoint", ck],
                           "\n".join(lines[137:]) + "\n")
    assert first + second == full


def test_stream_warm_start_from_eval_weights(tmp_path, monkeypatch, capsys):
    w = tmp_path / "w.json"
    cfg = _write(tmp_path / "c.json", {"reservoir": {"n_virtual": 10}, "task": {"length": 400},
                                       "output": {"weights": str(w)}})
    assert main(["eval", "--config", cfg]) == 0
    capsys.readouterr()
    code, out, _ = _stream(monkeypatch, capsys, ["--config", cfg, "--checkpoint", str(w), "-o",
                                                 str(tmp_path / "ck.json")], "0.2\n")
    assert code == 0 and float(out) != 0.0


def test_stream_divergence(tmp_path, monkeypatch, capsys):
    cfg = _write(tmp_path / "c.json", {"reservoir": {"nonlinearity": {"variant": "identity"},
                                                     "input_gain": 1e308, "n_virtual": 4}})
    code, out, err = _stream(monkeypatch, capsys, ["--config", cfg], "0.5\n1e308\n1\n")
    assert code == 3
    assert out.splitlines()[-1] == "diverged step=1" and "divergence" in err


def test_subprocess_entry_point(tmp_path):
    p = tmp_path / "d.csv"
    r = subprocess.run([sys.executable, "-m", "edgedfr", "generate", "--len", "50", "-o", str(p)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout == "" and p.exists()
    r = subprocess.run([sys.executable, "-m", "edgedfr", "stream"], input="0\n0.5,1\n",
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.splitlines()[0] == "0"
    r = subprocess.run([sys.executable, "-m", "edgedfr", "eval", "--config", str(tmp_path / "missing.json")],
                       capture_output=True, text=True)
    assert r.returncode == 2 and r.stdout == ""


@pytest.mark.parametrize("argv", [[], ["bogus"], ["eval", "--bogus"]])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2
