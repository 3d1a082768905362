import json

import pytest

from synpriming import cli


def run(*argv):
    return cli.main(list(argv))


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        run("nonsense")
    assert exc.value.code == cli.EXIT_USAGE


def test_missing_inputs_exit_code(tmp_path, capsys):
    assert run("train", "--out-dir", str(tmp_path)) == cli.EXIT_DATA
    assert "run the earlier stage first" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run("gen", "--config", str(cfg), "--out-dir", str(tmp_path)) == cli.EXIT_DATA


def test_selftest_passes(capsys):
    assert run("selftest") == cli.EXIT_OK
    assert "gradient check" in capsys.readouterr().out


def test_env_and_flags_override_config(tmp_path, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"out_dir": "from-config", "workers": 3}))
    monkeypatch.setenv("PRIMING_OUT_DIR", "from-env")
    args = cli.build_parser().parse_args(["run", "--config", str(cfg)])
    assert cli.load_config(args)["out_dir"] == "from-env"
    assert cli.load_config(args)["workers"] == 3
    args = cli.build_parser().parse_args(["run", "--config", str(cfg), "--out-dir", "from-flag"])
    assert cli.load_config(args)["out_dir"] == "from-flag"


def test_gen_from_text_file(tmp_path):
    from importlib.resources import files
    sample = files("synpriming") / "data" / "sample.txt"
    assert run("gen", "--out-dir", str(tmp_path), "--corpus-file", str(sample), "--n-lists", "1") == 0
    man = json.loads((tmp_path / "corpora" / "manifest.json").read_text())
    assert man["corpora"][0]["source"] == "file" and man["schema"] == "synpriming-corpora"


def test_full_pipeline_small(tmp_path):
    out = str(tmp_path)
    assert run("gen", "--out-dir", out, "--n-lists", "1", "--corpus-tokens", "3000") == 0
    assert run("train", "--out-dir", out, "--nhid", "8", "--epochs", "1") == 0
    assert run("run", "--out-dir", out) == 0
    records = (tmp_path / "records" / "records.tsv").read_bytes()
    assert run("run", "--out-dir", out, "--resume") == 0
    assert (tmp_path / "records" / "records.tsv").read_bytes() == records
    assert run("analyze", "--out-dir", out, "--n-perm", "19", "--n-boot", "10") == 0
    assert run("report", "--out-dir", out) == 0
    man = json.loads((tmp_path / "checkpoints" / "manifest.json").read_text())
    kinds = {v["kind"] for v in man["models"].values()}
    assert kinds == {"trained", "baseline"}
    assert all("held_out_surprisal" in v for v in man["models"].values())
    svgs = list((tmp_path / "report").glob("*.svg"))
    assert len(svgs) == 4
    assert json.loads((tmp_path / "analysis" / "tests.json").read_text())["schema"] == "synpriming-tests"
