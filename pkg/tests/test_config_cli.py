import math
import shutil

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zlab.cli import CommandError, emit_plot_tables, main
from zlab.config import ConfigError, RunConfig, parse_config, serialize_config
from zlab.dynamics import TimeSeriesRecord, read_timeseries

SMALL_SIM = """
[grid]
M = 32
L = 16.0
[physics]
u_preset = gaussian
u_params = 1.0, 1.2
n_preset = gaussian
n_params = 0.3, 1.5
w_preset = gaussian
w_params = 0.2, 1.0
[stepping]
dt_base = 0.002
t_end = 0.06
[diagnostics]
stride = 3
radii = 0.5, 1.0, 2.0
checkpoint_every = 6
"""


# --------------------------------------------------------------------------
# configuration


def test_defaults_parse_to_a_full_config():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.physics.s == 0.95 and cfg.schedule.eps == 1e-3 and cfg.grid.M == 128


def test_low_regularity_rejected_by_schedule():
    with pytest.raises(ConfigError) as info:
        parse_config("[physics]\ns = 0.5\n")
    assert any("s > 16/17" in p for p in info.value.problems)
    # a fixed N bypasses the schedule law and its range check
    assert parse_config("[physics]\ns = 0.5\n[schedule]\nfixed_N = 4\n").physics.s == 0.5


def test_unknown_keys_and_sections_rejected():
    with pytest.raises(ConfigError, match="unknown key physics.epsilon"):
        parse_config("[physics]\nepsilon = 0.01\n")
    with pytest.raises(ConfigError, match=r"unknown section \[physisc\]"):
        parse_config("[physisc]\ns = 0.95\n")


def test_every_problem_is_reported():
    text = "[grid]\nM = 1\n[stepping]\nt_end = -1\nadaptive = maybe\n[probe]\nkind = magic\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    probs = info.value.problems
    assert len(probs) >= 4
    for needle in ("grid", "t_end", "boolean", "probe.kind"):
        assert any(needle in p for p in probs), needle


def test_malformed_text():
    with pytest.raises(ConfigError, match="malformed"):
        parse_config("no section header\n")


finite = dict(allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(
    M=st.sampled_from([32, 64, 128]),
    L=st.floats(4.0, 16.0, **finite),  # keeps N_max >= N_min on the coarsest grid
    s=st.floats(0.95, 0.99, **finite),
    eps=st.floats(1e-4, 0.02, **finite),
    dt=st.floats(1e-4, 1e-2, **finite),
    radii=st.lists(st.floats(0.01, 2.0, **finite), min_size=1, max_size=5),
    coupling=st.booleans(),
    seed=st.integers(0, 2**31 - 1),
    out=st.text("abcdefgh_/", min_size=1, max_size=12),
)
def test_config_round_trip(M, L, s, eps, dt, radii, coupling, seed, out):
    cfg = (
        RunConfig()
        .with_section("grid", M=M, L=L)
        .with_section("physics", s=s, coupling=coupling)
        .with_section("schedule", eps=eps)
        .with_section("stepping", dt_base=dt)
        .with_section("diagnostics", radii=tuple(radii))
        .with_section("run", seed=seed, output_dir=out)
    )
    assert parse_config(serialize_config(cfg)) == cfg


# --------------------------------------------------------------------------
# commands


def run_cli(tmp_path, command, text, name="out", resume=None):
    cfg = tmp_path / f"{name}.ini"
    cfg.write_text(text)
    out = tmp_path / name
    argv = [command, "--config", str(cfg), "--out", str(out)]
    if resume:
        argv += ["--resume", str(resume)]
    return main(argv), out


def test_ground_state_command(tmp_path):
    code = main(["ground-state", "--out", str(tmp_path / "gs")])
    assert code == 0
    vals = dict(line.split() for line in (tmp_path / "gs" / "ground_state.txt").read_text().splitlines())
    assert float(vals["pohozaev_grad"]) <= 1e-6 and float(vals["pohozaev_l4"]) <= 1e-6
    assert float(vals["mass"]) == pytest.approx(11.7009, abs=1e-4)
    assert (tmp_path / "gs" / "profile.txt").exists()


def test_config_error_exit_code(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "simulate", "[physics]\ns = 0.5\n")
    assert code == 2
    assert "16/17" in capsys.readouterr().err


def test_simulate_free_plane_wave_has_constant_monitors(tmp_path):
    text = """
[grid]
M = 32
L = 6.283185307179586
[physics]
coupling = false
u_preset = plane_wave
u_params = 0.5, 2, 1
[schedule]
fixed_N = 3.0
[stepping]
adaptive = false
dt_base = 0.01
t_end = 0.2
[diagnostics]
stride = 4
radii = 0.5, 1.0
"""
    code, out = run_cli(tmp_path, "simulate", text)
    assert code == 0
    rows = read_timeseries(out / "timeseries.txt")
    assert rows[-1].t == pytest.approx(0.2) and rows[-1].stop_flag == 1
    for col in ("mass", "u_hs", "iu_h1", "H_vform", "modified_H"):
        v = np.array([getattr(r, col) for r in rows])
        assert np.ptp(v) <= 1e-12 * abs(v[0])
    assert all(r.nplus_l2 == 0 for r in rows)
    assert (out / "timeseries.txt").read_text().splitlines()[-1] == "# stop T_END"
    assert (out / "checkpoint.npz").exists() and (out / "concentration.txt").exists()
    for col in TimeSeriesRecord.columns()[1:]:
        assert (out / "tables" / f"{col}.txt").exists()


def test_simulate_is_deterministic_and_restartable(tmp_path):
    code_a, a = run_cli(tmp_path, "simulate", SMALL_SIM, "a")
    code_b, b = run_cli(tmp_path, "simulate", SMALL_SIM, "b")
    assert code_a == code_b == 0
    full = (a / "timeseries.txt").read_bytes()
    assert full == (b / "timeseries.txt").read_bytes()

    # restart a copy from a mid-run checkpoint and compare the whole file
    c = tmp_path / "c"
    shutil.copytree(a, c)
    ck = c / "checkpoint_000000012.npz"
    assert ck.exists()
    code_c, _ = run_cli(tmp_path, "simulate", SMALL_SIM, "c", resume=ck)
    assert code_c == 0
    assert (c / "timeseries.txt").read_bytes() == full
    assert np.array_equal(np.load(c / "checkpoint.npz")["u"], np.load(a / "checkpoint.npz")["u"])


def test_restart_rejects_other_configuration(tmp_path, capsys):
    _, a = run_cli(tmp_path, "simulate", SMALL_SIM, "a")
    other = SMALL_SIM.replace("t_end = 0.06", "t_end = 0.08")
    code, _ = run_cli(tmp_path, "simulate", other, "b", resume=a / "checkpoint_000000006.npz")
    assert code == 1
    assert "different configuration" in capsys.readouterr().err


def test_concentration_command(tmp_path, capsys):
    _, a = run_cli(tmp_path, "simulate", SMALL_SIM, "a")
    (a / "concentration.txt").unlink()
    code, _ = run_cli(tmp_path, "concentration", SMALL_SIM, "a")
    assert code == 0
    text = (a / "concentration.txt").read_text()
    assert "center argmax" in text and ("rescaled lambda" in text or "rescaled unavailable" in text)
    code, _ = run_cli(tmp_path, "concentration", SMALL_SIM, "empty")
    assert code == 1 and "no checkpoint" in capsys.readouterr().err


def test_probe_commands(tmp_path):
    text = "[probe]\nkind = schrodinger_radial\nM = 64\nL = 16.0\nq = inf\nr = 2.0\ntrials = 1\n"
    code, out = run_cli(tmp_path, "probe", text, "s")
    assert code == 0
    lines = (out / "probe.txt").read_text().splitlines()
    assert lines[0] == "estimate_id strichartz_schrodinger"
    text = "[probe]\nM = 64\nL = 12.566370614359172\nratios = 1, 2, 3, 4\ntrials = 1\n"
    code, out = run_cli(tmp_path, "probe", text, "b")
    assert code == 0
    assert (out / "probe.txt").read_text().startswith("estimate_id bilinear")
    with pytest.raises(ConfigError, match="top scale"):
        parse_config("[probe]\nM = 64\nL = 12.566370614359172\n")


def test_sweep_command(tmp_path):
    text = "[sweep]\nM = 32\nL = 2.0\nN_ladder = 2, 4, 8\ndt = 1e-4\nwindow = 2e-3\n"
    code, out = run_cli(tmp_path, "sweep", text)
    assert code == 0
    vals = dict(line.split(maxsplit=1) for line in (out / "sweep.txt").read_text().splitlines()[:6])
    assert math.isfinite(float(vals["slope"]))
    logs = np.loadtxt(out / "tables" / "log_drift.txt")
    assert np.allclose(logs[:, 0], np.log([2, 4, 8]))


def test_plot_tables_idempotent_and_partial(tmp_path):
    _, a = run_cli(tmp_path, "simulate", SMALL_SIM, "a")
    first = {p.name: p.read_bytes() for p in (a / "tables").iterdir()}
    emit_plot_tables(a)
    assert {p.name: p.read_bytes() for p in (a / "tables").iterdir()} == first
    assert "ball_mass_origin.txt" in first and "ball_mass_argmax.txt" in first

    # a crashed run: torn final row, no footer, no other outputs
    crashed = tmp_path / "crashed"
    crashed.mkdir()
    lines = (a / "timeseries.txt").read_text().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    crashed.joinpath("timeseries.txt").write_text("\n".join(lines[:2] + body[:3]) + "\n" + body[3][:20])
    emit_plot_tables(crashed)
    assert len(np.loadtxt(crashed / "tables" / "mass.txt")) == 3

    with pytest.raises(CommandError, match="missing series"):
        emit_plot_tables(tmp_path / "nothing")
