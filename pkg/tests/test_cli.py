import json

import pytest

from emgtoken.cli import main

PROFILE = """\
[profile]
seed = {seed}
sample_rate_hz = 1259
duration_ms = 4000

[channel VL]
levels = 0, 0.33, 0.66, 1
durations_ms = 400, 400, 400, 400

[channel RF]
levels = 1, 0.5, 0
durations_ms = 300, 300, 300
"""


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def walkthrough(tmp, capsys):
    """synth -> train -> tokenize -> score -> stats -> report; returns produced files."""
    for seed, name in [(1, "a"), (2, "b")]:
        (tmp / f"{name}.ini").write_text(PROFILE.format(seed=seed))
        assert run(capsys, "synth", "--profile", tmp / f"{name}.ini", "--out", tmp / f"{name}.csv")[0] == 0
    (tmp / "m.csv").write_text(
        "path,format,sample_rate_hz,action,subject\na.csv,csv,1259,squat,s1\nb.csv,csv,1259,squat,s2\n"
    )
    (tmp / "cfg.json").write_text(json.dumps({"k_clusters": 4, "kmeans_restarts": 3}))
    assert run(capsys, "train", "--manifest", tmp / "m.csv", "--config", tmp / "cfg.json",
               "--out", tmp / "cb.json")[0] == 0
    (tmp / "toks").mkdir()
    assert run(capsys, "tokenize", "--codebook", tmp / "cb.json", "--input", tmp / "a.csv",
               "--sample-rate", 1259, "--out", tmp / "toks" / "a.csv")[0] == 0
    code, out, _ = run(capsys, "score", "--codebook", tmp / "cb.json", "--standard", tmp / "a.csv",
                       "--candidate", tmp / "b.csv", "--sample-rate", 1259, "--out", tmp / "score.csv")
    assert code == 0 and "similarity=" in out
    assert run(capsys, "stats", "--codebook", tmp / "cb.json", "--input", tmp / "a.csv",
               "--sample-rate", 1259, "--out", tmp / "stats.csv")[0] == 0
    assert run(capsys, "report", "--codebook", tmp / "cb.json", "--tokens", tmp / "toks",
               "--out", tmp / "rep")[0] == 0
    return sorted(p for p in tmp.rglob("*") if p.is_file())


def test_walkthrough_and_byte_determinism(tmp_path, capsys):
    (tmp_path / "r1").mkdir()
    (tmp_path / "r2").mkdir()
    a = walkthrough(tmp_path / "r1", capsys)
    b = walkthrough(tmp_path / "r2", capsys)
    rel_a = [p.relative_to(tmp_path / "r1") for p in a]
    rel_b = [p.relative_to(tmp_path / "r2") for p in b]
    assert rel_a == rel_b
    assert not any(p.suffix == ".lock" for p in a)
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes(), pa.name


def test_score_same_file_is_100(tmp_path, capsys):
    walkthrough(tmp_path, capsys)
    code, out, _ = run(capsys, "score", "--codebook", tmp_path / "cb.json", "--standard", tmp_path / "a.csv",
                       "--candidate", tmp_path / "a.csv", "--sample-rate", 1259)
    assert code == 0
    assert "similarity=100.00%" in out


def test_select_k_bad_range_is_usage_error(tmp_path, capsys):
    code, _, err = run(capsys, "select-k", "--manifest", tmp_path / "m.csv", "--kmin", 3, "--kmax", 2,
                       "--out", tmp_path / "x.csv")
    assert code == 1
    assert json.loads(err)["exit_code"] == 1


def test_unknown_command_is_usage_error(capsys):
    assert run(capsys, "frobnicate")[0] == 1


def test_missing_file_is_data_error(tmp_path, capsys):
    code, _, err = run(capsys, "tokenize", "--codebook", tmp_path / "none.json", "--input", tmp_path / "x.csv",
                       "--sample-rate", 1000, "--out", tmp_path / "t.csv")
    assert code == 2
    assert set(json.loads(err)) == {"error", "exit_code", "message"}


def test_nonfinite_sample_reports_position(tmp_path, capsys):
    walkthrough(tmp_path, capsys)
    lines = (tmp_path / "a.csv").read_text().splitlines()
    lines[5] = "nan," + lines[5].split(",", 1)[1]
    (tmp_path / "bad.csv").write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, "tokenize", "--codebook", tmp_path / "cb.json", "--input", tmp_path / "bad.csv",
                       "--sample-rate", 1259, "--out", tmp_path / "t.csv")
    assert code == 2
    assert json.loads(err)["error"] == "NonFiniteSample"


def test_locked_output_is_refused(tmp_path, capsys):
    walkthrough(tmp_path, capsys)
    (tmp_path / "t.csv.lock").write_text("")
    code, _, err = run(capsys, "tokenize", "--codebook", tmp_path / "cb.json", "--input", tmp_path / "a.csv",
                       "--sample-rate", 1259, "--out", tmp_path / "t.csv")
    assert code == 2
    assert json.loads(err)["error"] == "OutputLocked"
    assert not (tmp_path / "t.csv").exists()


def test_config_mismatch_on_tokenize(tmp_path, capsys):
    walkthrough(tmp_path, capsys)
    (tmp_path / "other.json").write_text(json.dumps({"k_clusters": 4, "window_ms": 100}))
    code, _, err = run(capsys, "tokenize", "--codebook", tmp_path / "cb.json", "--input", tmp_path / "a.csv",
                       "--sample-rate", 1259, "--config", tmp_path / "other.json", "--out", tmp_path / "t.csv")
    assert code == 2
    assert json.loads(err)["error"] == "ConfigMismatch"


def test_select_k_with_reference(tmp_path, capsys):
    walkthrough(tmp_path, capsys)
    code, out, _ = run(capsys, "select-k", "--manifest", tmp_path / "m.csv", "--config", tmp_path / "cfg.json",
                       "--kmin", 2, "--kmax", 4, "--folds", 2, "--reference", tmp_path / "a.reference.csv",
                       tmp_path / "b.reference.csv", "--out", tmp_path / "sk.csv")
    assert code == 0
    assert "best_k_by_pnmi=" in out
    rows = (tmp_path / "sk.csv").read_text().splitlines()
    assert rows[0] == "K,fold,sse,pnmi" and len(rows) == 1 + 3 * 2
    assert (tmp_path / "sk_summary.csv").exists()


def test_consistency_writes_report(tmp_path, capsys):
    walkthrough(tmp_path, capsys)
    code, out, _ = run(capsys, "consistency", "--train-manifest", tmp_path / "m.csv", "--test-manifest",
                       tmp_path / "m.csv", "--config", tmp_path / "cfg.json", "--out", tmp_path / "cons")
    assert code == 0
    assert out.startswith("overlap=")
    assert (tmp_path / "cons" / "confusion.csv").exists()


def test_env_config_default(tmp_path, capsys, monkeypatch):
    walkthrough(tmp_path, capsys)
    monkeypatch.setenv("EMGTOKEN_CONFIG", str(tmp_path / "cfg.json"))
    assert run(capsys, "train", "--manifest", tmp_path / "m.csv", "--out", tmp_path / "cb2.json")[0] == 0
    assert (tmp_path / "cb2.json").read_bytes() == (tmp_path / "cb.json").read_bytes()


@pytest.mark.parametrize("cmd", ["train", "tokenize", "select-k", "consistency", "score", "stats", "report", "synth"])
def test_help(cmd, capsys):
    with pytest.raises(SystemExit) as exc:
        main([cmd, "--help"])
    assert exc.value.code == 0
    assert "--out" in capsys.readouterr().out
