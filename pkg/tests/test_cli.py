import json
import subprocess
import sys

import pytest

from rsma.cli import main, number
from rsma.io import read_csv, read_manifest
from rsma.presets import preset_names

FAST = ["--restarts", "1", "--no-figures", "--workers", "1"]


def test_number_parses_pi_forms():
    assert number("pi/9") == pytest.approx(0.3490658503988659)
    assert number("2pi/9") == pytest.approx(2 * 0.3490658503988659)
    assert number("-pi") == pytest.approx(-3.141592653589793)
    assert number("0.25") == 0.25


def test_preset_list(capsys):
    assert main(["preset", "list"]) == 0
    out = capsys.readouterr().out
    for n in preset_names():
        assert n in out


def test_list_variants(capsys):
    assert main(["run", "fig5", "--list-variants"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 4


def test_region_writes_bundle(tmp_path, capsys):
    code = main(
        ["region", "--strategies", "mulp", "--snr", "10", "--thetas", "pi/4", "--out", str(tmp_path),
         "--name", "t"] + FAST)
    assert code == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0].split("\t")[:3] == ["strategy", "u2", "R1"]
    assert len(out) == 1 + 43
    _, rows = read_csv(tmp_path / "t_mulp.csv")
    assert len(rows) == 43
    m = read_manifest(tmp_path / "t.manifest.json")
    assert m["config"]["snr_db"] == 10.0


def test_curve_and_config_from_manifest(tmp_path, capsys):
    args = ["curve", "--strategies", "mulp", "--snrs", "0,10", "--K", "2", "--weights", "1,0.5", "--out",
            str(tmp_path), "--name", "c"] + FAST
    assert main(args) == 0
    first = capsys.readouterr().out
    # the manifest's config reproduces the run
    assert main(["curve", "--config", str(tmp_path / "c.manifest.json"), "--strategies", "mulp", "--snrs", "0,10",
                 "--out", str(tmp_path / "again"), "--name", "c"] + FAST) == 0
    assert capsys.readouterr().out == first
    assert (tmp_path / "c_mulp.csv").read_text() == (tmp_path / "again" / "c_mulp.csv").read_text()


def test_threshold_schedule_and_set(tmp_path, capsys):
    code = main(["curve", "--strategies", "rs", "--snrs", "10", "--threshold-schedule", "0.5",
                 "--set", "max_iter=50", "--out", str(tmp_path), "--name", "q"] + FAST)
    assert code == 0
    m = read_manifest(tmp_path / "q.manifest.json")
    assert m["config"]["max_iter"] == 50
    _, rows = read_csv(tmp_path / "q_rs.csv")
    assert min(rows[-1]["R1"], rows[-1]["R2"]) >= 0.5 - 1e-6


def test_usage_errors_exit_1(tmp_path, capsys):
    assert main(["run", "no-such-preset"]) == 1
    assert "available presets" in capsys.readouterr().err
    with pytest.raises(SystemExit) as e:
        main(["region", "--bogus"])
    assert e.value.code == 1
    assert main(["curve", "--set", "nonsense", "--out", str(tmp_path)]) == 1
    assert main(["curve", "--set", "colour=1", "--out", str(tmp_path)]) == 1


def test_infeasible_exit_2(tmp_path):
    code = main(["curve", "--strategies", "mulp", "--snrs", "0", "--thresholds", "5,5", "--out", str(tmp_path)]
                + FAST)
    assert code == 2


def test_cap_exit_3(tmp_path, capsys):
    code = main(["curve", "--strategies", "sc-sic", "--K", "3", "--gammas", "1,1", "--thetas", "pi/9,2pi/9",
                 "--weights", "1,1,1", "--snrs", "10", "--cap", "1", "--out", str(tmp_path)] + FAST)
    assert code == 3
    assert "cap" in capsys.readouterr().err


def test_validate(capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 5


def test_console_script_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "rsma.cli", "preset", "list"], capture_output=True, text=True)
    assert r.returncode == 0 and "fig5" in r.stdout
    r = subprocess.run([sys.executable, "-m", "rsma.cli"], capture_output=True, text=True)
    assert r.returncode == 1
