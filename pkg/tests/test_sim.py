import json
import math

import numpy as np
import pytest

from stokespatch import sim as simmod
from stokespatch.diagnostics import read_diagnostics
from stokespatch.errors import ConfigError
from stokespatch.fields import ScalarField, VectorField, make_grid, read_snapshot, write_snapshot
from stokespatch.kernels import read_contour_csv
from stokespatch.sim import (
    OUTPUT_DIR_ENV,
    AnnulusCosineIC,
    CircleIC,
    CustomFileIC,
    SimConfig,
    initial_levelset,
    parse_config,
    resume_simulation,
    run_simulation,
    serialize_config,
    snapshot_times,
)


def test_parse_minimal_applies_defaults():
    cfg = parse_config("n = 256\nt_final = 25\n")
    assert (cfg.n, cfg.t_final) == (256, 25.0)
    assert cfg.cfl == 0.5 and cfg.dt_max == 1e-2 and cfg.epsilon == 0
    assert cfg.area_error_abort == 0.01 and cfg.seed == 0
    assert cfg.snapshot_interval == 2.5
    assert cfg.initial_condition == AnnulusCosineIC()


@pytest.mark.parametrize(
    "text, line",
    [
        ("n = 64\nt_final = 1\ncfl = 0.6\n", 3),
        ("n = 64\nbogus = 1\nt_final = 1\n", 2),
        ("n = 64\nn = 128\nt_final = 1\n", 2),
        ("n = 48\nt_final = 1\n", 1),
        ("n = 64\nt_final = -1\n", 2),
        ("n = 64\nt_final = 1\nsnapshot_interval = 2\n", 3),
        ("n = 64\nt_final = 1\nepsilon = -0.1\n", 3),
        ("n = 64\nt_final = 1\ninitial_condition = square\n", 3),
        ("n = 64\nt_final = one\n", 2),
        ("n = 64\njust words\n", 2),
    ],
)
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


@pytest.mark.parametrize("text", ["t_final = 1\n", "n = 64\n"])
def test_parse_missing_required(text):
    with pytest.raises(ConfigError, match="missing"):
        parse_config(text)


def test_parse_comments_and_initial_conditions(tmp_path):
    cfg = parse_config(
        "# a run\nn = 64   # grid\nt_final = 2\ninitial_condition = circle(0.1, -0.2, 0.15)\npreview = yes\n"
    )
    assert cfg.initial_condition == CircleIC((0.1, -0.2), 0.15)
    assert cfg.preview is True
    cfg = parse_config(f"n = 64\nt_final = 2\ninitial_condition = custom_file({tmp_path / 'x.pstk'})\n")
    assert isinstance(cfg.initial_condition, CustomFileIC)
    cfg = parse_config("n = 64\nt_final = 2\ninitial_condition = annulus_cosine(0.1, 0.2)\n")
    assert cfg.initial_condition == AnnulusCosineIC((0.1, 0.2))


@pytest.mark.parametrize(
    "text",
    [
        "n = 256\nt_final = 25\n",
        "n = 64\nt_final = 0.3\ncfl = 0.25\nsnapshot_interval = 0.1\nepsilon = 0.015625\n"
        "initial_condition = circle(0.1, 0.2, 0.3)\noutput_dir = runs/a\ndt_max = 0.001\nseed = 7\n",
    ],
)
def test_serialize_round_trip(text):
    cfg = parse_config(text)
    assert parse_config(serialize_config(cfg)) == cfg


def test_snapshot_times_hit_interval_and_end():
    assert snapshot_times(0.0, 1.0, 0.25) == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert snapshot_times(0.0, 1.0, 0.3) == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])
    assert snapshot_times(0.5, 1.0, 0.25) == [0.5, 0.75, 1.0]


def test_empty_patch_rejected_at_start(tmp_path):
    g = make_grid(32)
    p = tmp_path / "empty.pstk"
    write_snapshot(p, ScalarField(g, -np.ones((32, 32))), 0.0)
    cfg = SimConfig(n=32, t_final=1.0, initial_condition=CustomFileIC(str(p)))
    with pytest.raises(ConfigError):
        initial_levelset(cfg)
    with pytest.raises(ConfigError):
        run_simulation(cfg, output_dir=tmp_path / "out")
    with pytest.raises(ConfigError):
        initial_levelset(SimConfig(n=64, t_final=1.0, initial_condition=CustomFileIC(str(p))))


def _small(**kw):
    base = dict(n=64, t_final=0.4, snapshot_interval=0.1, hess_probes=8, holder_pairs=200)
    base.update(kw)
    return SimConfig(**base)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    summary = run_simulation(_small(preview=True), output_dir=out)
    return out, summary


def test_run_outputs_per_snapshot(small_run):
    out, summary = small_run
    assert summary.status == "completed"
    assert summary.snapshot_times == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4], rel=1e-15)
    recs = read_diagnostics(out / "diagnostics.csv")
    assert [r.t for r in recs] == summary.snapshot_times
    for k, t in enumerate(summary.snapshot_times):
        phi, ts = read_snapshot(out / f"snap_{k:05d}.pstk")
        assert ts == t
        contour, tc = read_contour_csv(out / f"contour_{k:05d}.csv")
        assert tc == t
        head = (out / f"contour_{k:05d}.csv").read_text().splitlines()[0]
        assert "q2=" in head
        assert (out / f"preview_{k:05d}.pgm").read_bytes().startswith(b"P5\n64 64\n255\n")
    assert all(r.realized_cfl <= 0.5 for r in recs)
    assert all(r.is_finite() for r in recs)
    data = json.loads((out / "summary.json").read_text())
    assert data["status"] == "completed" and data["dt_max"] == 0.01 and data["steps"] == summary.steps


def test_run_is_deterministic(small_run, tmp_path):
    out, _ = small_run
    run_simulation(_small(), output_dir=tmp_path)
    for k in range(5):
        assert (tmp_path / f"snap_{k:05d}.pstk").read_bytes() == (out / f"snap_{k:05d}.pstk").read_bytes()
    assert (tmp_path / "diagnostics.csv").read_bytes() == (out / "diagnostics.csv").read_bytes()


def test_resume_reproduces_later_snapshots(small_run, tmp_path):
    out, _ = small_run
    summary = resume_simulation(out / "snap_00002.pstk", _small(), output_dir=tmp_path)
    assert summary.status == "completed" and summary.t_start == pytest.approx(0.2)
    for k in (3, 4):
        a, ta = read_snapshot(out / f"snap_{k:05d}.pstk")
        b, tb = read_snapshot(tmp_path / f"snap_{k:05d}.pstk")
        assert ta == tb
        assert np.max(np.abs(a.values - b.values)) <= 1e-12
    assert not (tmp_path / "snap_00002.pstk").exists()


def test_resume_rejects_grid_mismatch(small_run, tmp_path):
    out, _ = small_run
    with pytest.raises(ConfigError):
        resume_simulation(out / "snap_00001.pstk", _small(n=128), output_dir=tmp_path)


def test_area_abort_records_time(tmp_path):
    summary = run_simulation(_small(area_error_abort=1e-9), output_dir=tmp_path)
    assert summary.status == "area-abort"
    assert summary.abort_time is not None and 0 < summary.abort_time < 0.4
    assert json.loads((tmp_path / "summary.json").read_text())["status"] == "area-abort"


def test_blow_up_is_reported(tmp_path, monkeypatch):
    def bad_velocity(phi, epsilon=0.0):
        g = phi.grid
        return VectorField(g, np.full((2, g.n, g.n), np.nan))

    monkeypatch.setattr(simmod, "velocity_from_levelset", bad_velocity)
    summary = run_simulation(_small(dt_max=0.01), write_files=False)
    assert summary.status == "blow-up"


def test_env_var_overrides_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env"))
    run_simulation(_small(t_final=0.1, snapshot_interval=0.1, output_dir=str(tmp_path / "cfg")))
    assert (tmp_path / "env" / "snap_00001.pstk").exists()
    assert not (tmp_path / "cfg").exists()


def test_regularized_run_and_callback():
    seen = []
    summary = run_simulation(
        _small(epsilon=4 / 64, t_final=0.2), write_files=False, on_snapshot=lambda s, r: seen.append((s.t, r.t))
    )
    assert summary.status == "completed" and summary.epsilon == 0.0625
    assert [a for a, _ in seen] == [b for _, b in seen] == summary.snapshot_times


def test_annulus_initial_condition_geometry():
    g = make_grid(256)
    phi = AnnulusCosineIC().levelset(g)
    theta = phi.values > 0
    assert abs(theta.sum() * g.h**2 - math.pi / 16) < 2 * math.pi * 0.25 * g.h
