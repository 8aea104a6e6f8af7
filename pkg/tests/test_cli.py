import json
from pathlib import Path

import pytest

from qlclab import cli, report

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(argv, capsys):
    code = cli.dispatch(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_unknown_command_is_usage_error(capsys):
    code, _, err = run(["frobnicate"], capsys)
    assert code == cli.EXIT_USAGE and "usage" in err


def test_bad_flags_and_missing_config(capsys, tmp_path):
    assert run(["bounds", "--threads", "0", "--no-write"], capsys)[0] == cli.EXIT_USAGE
    assert run(["bounds", "--config", str(tmp_path / "nope.toml")], capsys)[0] == cli.EXIT_USAGE
    bad = write(tmp_path, "[scenario]\nscheme = 'nqlc'\njoint = [[[1.0, 0.5]]]\n")
    assert run(["bounds", "--config", bad, "--no-write"], capsys)[0] == cli.EXIT_USAGE


def test_bounds_prints_and_writes(capsys, tmp_path):
    code, out, _ = run(["bounds", "--config", str(CONFIGS / "bounds.toml"), "--out", str(tmp_path)], capsys)
    assert code == cli.EXIT_OK
    assert "sum-rate" in out and "slack=" in out
    files = sorted(p.suffix for p in tmp_path.iterdir())
    assert files == [".csv", ".jsonl"]
    csv_file = next(tmp_path.glob("*.csv"))
    assert csv_file.read_text().splitlines()[0] == ",".join(report.CSV_COLUMNS)
    assert csv_file.name.startswith("bounds-") and csv_file.stem.endswith("-0")


def test_records_format_embeds_config_and_seed(capsys):
    code, out, _ = run(["bounds", "--config", str(CONFIGS / "bounds.toml"), "--seed", "5",
                        "--format", "records", "--no-write"], capsys)
    lines = [json.loads(l) for l in out.splitlines()]
    assert code == 0 and lines[0]["type"] == "header"
    assert lines[0]["seed"] == 5 and "joint" in lines[0]["config"]
    assert {l["type"] for l in lines[1:]} <= {"record", "row"}


def test_md_example_defaults_report_no_root(capsys):
    code, out, _ = run(["md-example", "--format", "records", "--no-write"], capsys)
    assert code == cli.EXIT_OK
    recs = [json.loads(l) for l in out.splitlines()]
    assert any(r.get("status") == "no-root" for r in recs)
    assert any(r.get("label") == "covering:combo[1,2]" for r in recs)


def test_cap_exceeded_exit_code(capsys):
    code, _, err = run(["covering", "--config", str(CONFIGS / "covering.toml"), "--cap", "10",
                        "--no-write"], capsys)
    assert code == cli.EXIT_INFEASIBLE and "cap" in err


def test_infeasible_region_exit_code(capsys, tmp_path):
    text = (CONFIGS / "region-check.toml").read_text().replace('"rho[1]" = 0.35', '"rho[1]" = 0.0')
    code, _, _ = run(["region-check", "--config", write(tmp_path, text), "--no-write"], capsys)
    assert code == cli.EXIT_INFEASIBLE


def test_internal_error_exit_code(capsys, monkeypatch):
    def boom(cfg, seed, args):
        raise RuntimeError("boom")

    monkeypatch.setitem(cli.COMMANDS, "entropy", boom)
    assert run(["entropy", "--no-write"], capsys)[0] == cli.EXIT_INTERNAL


@pytest.mark.parametrize("name", sorted(p.stem for p in CONFIGS.glob("*.toml")))
def test_canonical_configs_run(name, capsys):
    cmd = name.replace("-violated", "")
    code, _, _ = run([cmd, "--config", str(CONFIGS / f"{name}.toml"), "--no-write"], capsys)
    assert code == cli.EXIT_OK


def test_rerun_is_byte_identical(capsys, tmp_path):
    outs = []
    for i in range(2):
        d = tmp_path / str(i)
        assert run(["sumset", "--config", str(CONFIGS / "sumset.toml"), "--seed", "7", "--out", str(d)],
                   capsys)[0] == 0
        outs.append({p.suffix: p.read_bytes() for p in d.iterdir()})
    assert outs[0] == outs[1]


def test_out_dir_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv(report.OUT_ENV, str(tmp_path / "env"))
    assert run(["entropy"], capsys)[0] == 0
    assert len(list((tmp_path / "env").iterdir())) == 2
