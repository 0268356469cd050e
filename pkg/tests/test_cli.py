import json
import subprocess
import sys

import numpy as np
import pytest

from stokespatch import cli
from stokespatch import sim as simmod
from stokespatch.fields import VectorField
from stokespatch.sim import OUTPUT_DIR_ENV
from stokespatch.verify import Report

SMALL = "n = 64\nt_final = 0.2\nsnapshot_interval = 0.1\nhess_probes = 8\nholder_pairs = 100\n"


@pytest.fixture
def config(tmp_path):
    def write(text=SMALL, name="run.cfg"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return write


def test_run_success_and_summary(config, tmp_path, capsys):
    code = cli.main(["run", config(), "--output-dir", str(tmp_path / "o")])
    assert code == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["status"] == "completed"
    assert (tmp_path / "o" / "snap_00002.pstk").exists()


def test_env_var_output_dir(config, tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env"))
    assert cli.main(["run", config()]) == 0
    assert (tmp_path / "env" / "diagnostics.csv").exists()


def test_config_error_exit_code(config, capsys):
    assert cli.main(["run", config("n = 64\nt_final = 1\ncfl = 0.6\n")]) == 2
    assert "line 3" in capsys.readouterr().err


def test_area_abort_exit_code(config, tmp_path):
    assert cli.main(["run", config(SMALL + "area_error_abort = 1e-9\n"), "--output-dir", str(tmp_path)]) == 4


def test_blow_up_exit_code(config, tmp_path, monkeypatch):
    monkeypatch.setattr(
        simmod, "velocity_from_levelset", lambda phi, eps=0.0: VectorField(phi.grid, np.full((2, 64, 64), np.nan))
    )
    assert cli.main(["run", config(), "--output-dir", str(tmp_path)]) == 3


def test_resume(config, tmp_path):
    cfg = config()
    assert cli.main(["run", cfg, "--output-dir", str(tmp_path / "a")]) == 0
    code = cli.main(["resume", str(tmp_path / "a" / "snap_00001.pstk"), cfg, "--output-dir", str(tmp_path / "b")])
    assert code == 0
    assert (tmp_path / "a" / "snap_00002.pstk").read_bytes() == (tmp_path / "b" / "snap_00002.pstk").read_bytes()


def test_missing_file_is_io_error(tmp_path):
    assert cli.main(["run", str(tmp_path / "nope.cfg")]) == 1


def test_verify_stokes_prints_table(capsys):
    assert cli.main(["verify", "stokes"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "bundle\tcheck\tmeasured\tthreshold\tstatus"
    assert all(line.split("\t")[-1] == "PASS" for line in out[1:])


def test_verify_failure_exit_code(monkeypatch):
    def failing(name, **kw):
        r = Report(name)
        r.le("x", 2.0, 1.0)
        return r

    monkeypatch.setattr(cli, "run_bundle", failing)
    assert cli.main(["verify", "kernels"]) == 5


def test_unknown_subcommand():
    assert cli.main(["verify", "everything"]) == 2
    assert cli.main([]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "stokespatch", "verify", "stokes"], capture_output=True, text=True)
    assert res.returncode == 0 and "TOTAL" in res.stdout
