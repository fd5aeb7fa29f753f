import json
import subprocess
import sys

import pytest

from conftest import CLI_SMOKE
from mixlab import __version__
from mixlab.cli import COMMANDS, EXIT_OK, EXIT_SIZE_CAP, EXIT_USAGE, EXIT_VIOLATION, run


def test_smoke_covers_every_subcommand():
    assert set(CLI_SMOKE) == set(COMMANDS)


@pytest.mark.parametrize("command", sorted(CLI_SMOKE))
def test_subcommand_runs_and_writes_manifest(command, tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    out = tmp_path / command
    code = run([command, *CLI_SMOKE[command], "--seed", "3", "--out", str(out)])
    assert code == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == command and manifest["seed"] == 3
    assert manifest["version"] == __version__
    assert manifest["started_at"] == "1970-01-01T00:00:00Z"
    assert len(list(out.iterdir())) >= 2


def test_csv_uses_crlf(tmp_path):
    run(["mix", "--n", "6", "--out", str(tmp_path)])
    raw = (tmp_path / "curve.csv").read_bytes()
    assert raw.startswith(b"t,d,s\r\n")
    assert raw.count(b"\r\n") == raw.count(b"\n")


def test_json_format(tmp_path):
    run(["spectrum", "--graph", "complete", "--n", "4", "--format", "json", "--out", str(tmp_path)])
    data = json.loads((tmp_path / "summary.json").read_text())
    assert data


def test_mix_bound_reported(tmp_path):
    run(["mix", "--n", "16", "--out", str(tmp_path)])
    text = (tmp_path / "summary.csv").read_text()
    assert "t_mix" in text


@pytest.mark.parametrize("argv,code", [
    (["bogus"], EXIT_USAGE),
    (["mix", "--n", "2"], EXIT_USAGE),
    (["mix", "--eps", "2"], EXIT_USAGE),
    (["cover", "--n", "20"], EXIT_SIZE_CAP),
    (["lamplighter", "--n-min", "3", "--n-max", "12", "--cap", "1000"], EXIT_SIZE_CAP),
])
def test_exit_codes(argv, code, tmp_path):
    assert run([*argv, "--out", str(tmp_path)] if argv[0] != "bogus" else argv) == code


def test_violation_exit_code(tmp_path):
    # a probe with a large exponent fails the superharmonicity check
    code = run(["adapted", "--tool", "probe", "--alpha", "2", "--out", str(tmp_path)])
    assert code == EXIT_VIOLATION
    assert (tmp_path / "summary.csv").exists()


def test_help_and_version():
    assert run(["--help"]) == 0
    assert run(["--version"]) == 0


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mixlab.cli", "tv", "--pairs", "3", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "tv.csv").exists()


def test_speed_burn_in(tmp_path):
    out = tmp_path / "speed"
    assert run(["speed", "--model", "tree", "--d", "3", "--steps", "200", "--walks", "100",
                "--burn-in", "50", "--out", str(out)]) == 0
    assert "burn_in" in next(out.glob("summary*")).read_text()
    assert run(["speed", "--model", "lamp", "--d", "1", "--steps", "20", "--walks", "5",
                "--burn-in", "5", "--out", str(out)]) == 2
