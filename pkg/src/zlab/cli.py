"""Command line entry point: ``zlab <command> --config FILE [--resume CKPT] [--out DIR]``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, parse_config, serialize_config
from .diagnostics import (
    bilinear_probe,
    concentration_scan,
    drift_slope_experiment,
    power_law_state,
    rescale_snapshot,
    strichartz_probe,
)
from .dynamics import (
    InitialData,
    Simulation,
    StepControl,
    Stop,
    build_initial_state,
    config_digest,
    integrate,
    load_checkpoint_state,
    monitor_norms,
    read_timeseries,
    TimeSeriesRecord,
)
from .energetics import ISchedule
from .groundstate import equation_residual, mass_threshold, read_profile, solve_townes, write_profile
from .spectral import Grid2D

log = logging.getLogger("zlab")

TIMESERIES = "timeseries.txt"
CHECKPOINT = "checkpoint.npz"
PROFILE = "profile.txt"


class CommandError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# helpers


def _grid(cfg: RunConfig) -> Grid2D:
    return Grid2D(cfg.grid.M, cfg.grid.L)


def _profile(out: Path):
    path = out / PROFILE
    if path.exists():
        return read_profile(path)
    prof = solve_townes()
    write_profile(path, prof)
    return prof


def _initial_data(cfg: RunConfig) -> InitialData:
    ph = cfg.physics
    return InitialData(
        u_preset=ph.u_preset,
        u_params=ph.u_params,
        n_preset=ph.n_preset,
        n_params=ph.n_params,
        w_preset=ph.w_preset,
        w_params=ph.w_params,
        radial_required=ph.radial_required,
        file=ph.u_file,
    )


def build_simulation(cfg: RunConfig, out: Path) -> tuple[Simulation, dict]:
    grid = _grid(cfg)
    profile = _profile(out) if cfg.physics.u_preset == "townes_scaled" else None
    state, diag = build_initial_state(_initial_data(cfg), grid, profile, dealias=cfg.physics.dealias)
    sc = cfg.schedule
    n_max = sc.N_max if sc.N_max is not None else grid.n_max
    lam_ref = sc.lambda_ref
    if lam_ref is None:
        lam_ref = monitor_norms(state, 1.0, cfg.physics.s)["u_hs"] or 1.0
    schedule = ISchedule(cfg.physics.s, sc.eps, sc.N_min, n_max, lambda_ref=lam_ref, fixed_N=sc.fixed_N)
    st = cfg.stepping
    control = StepControl(st.dt_base, st.c_local, sc.eps, st.dt_min, st.tail_fraction_max, st.growth_factor, st.adaptive)
    sim = Simulation(
        state=state,
        s=cfg.physics.s,
        schedule=schedule,
        control=control,
        t_end=st.t_end,
        coupling=cfg.physics.coupling,
        dealias=cfg.physics.dealias,
        max_steps=st.max_steps,
        config_hash=config_digest(serialize_config(cfg)),
    )
    return sim, diag


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    log.info("wrote %s", path)


# --------------------------------------------------------------------------
# commands


def cmd_ground_state(cfg: RunConfig, out: Path, resume=None) -> int:
    prof = solve_townes()
    write_profile(out / PROFILE, prof)
    r1, r2 = prof.pohozaev_residuals()
    _write(
        out / "ground_state.txt",
        f"Q0 {float(prof.q0)!r}\nmass {float(prof.mass)!r}\nthreshold {float(mass_threshold(prof))!r}\n"
        f"grad_sq {float(prof.grad_sq)!r}\nl4_fourth {float(prof.l4_fourth)!r}\n"
        f"pohozaev_grad {float(r1)!r}\npohozaev_l4 {float(r2)!r}\nequation_residual {float(equation_residual(prof))!r}\n",
    )
    return 0


def cmd_simulate(cfg: RunConfig, out: Path, resume=None) -> int:
    sim, diag = build_simulation(cfg, out)
    if not diag.get("decay_ok", True):
        log.warning("initial data does not decay inside the box: boundary ratio %.3e", diag["boundary_ratio"])
    ts_path = out / TIMESERIES
    header = "# config_hash " + sim.config_hash + "\n# " + " ".join(TimeSeriesRecord.columns()) + "\n"
    if resume is not None:
        sim.restore(resume)
        kept = [r for r in read_timeseries(ts_path) if r.t <= sim.state.t] if ts_path.exists() else []
        ts_path.write_text(header + "".join(r.to_row() + "\n" for r in kept))
        mode = "a"
    else:
        mode = "w"
    every = cfg.diagnostics.checkpoint_every
    with open(ts_path, mode) as fh:
        if mode == "w":
            fh.write(header)
        for rec in integrate(sim, stride=cfg.diagnostics.stride, emit_initial=resume is None):
            fh.write(rec.to_row() + "\n")
            fh.flush()
            if every and sim.step_count % every == 0 and sim.stop == Stop.RUNNING:
                sim.checkpoint(out / f"checkpoint_{sim.step_count:09d}.npz")
        fh.write(f"# stop {sim.stop.name}" + (f" {sim.failure}" if sim.failure else "") + "\n")
    sim.checkpoint(out / CHECKPOINT)
    prof = _profile(out)
    rep = concentration_scan(sim.state, prof.mass, cfg.diagnostics.radii)
    _write(out / "concentration.txt", rep.to_text())
    emit_plot_tables(out)
    return 0 if sim.stop != Stop.FAILURE else 3


def cmd_probe(cfg: RunConfig, out: Path, resume=None) -> int:
    pr = cfg.probe
    if pr.kind == "bilinear":
        res = bilinear_probe(Grid2D(pr.M, pr.L), pr.N1, pr.ratios, pr.delta, pr.trials, seed=cfg.run.seed)
    else:
        res = strichartz_probe(pr.kind, pr.q, pr.r, pr.trials, Grid2D(pr.M, pr.L), pr.T, pr.dilation, seed=cfg.run.seed)
    _write(out / "probe.txt", res.to_text())
    return 0


def cmd_sweep(cfg: RunConfig, out: Path, resume=None) -> int:
    sw = cfg.sweep
    state = power_law_state(Grid2D(sw.M, sw.L), sw.decay, cfg.run.seed)
    res = drift_slope_experiment(state, sw.N_ladder, cfg.physics.s, sw.dt, sw.window)
    _write(out / "sweep.txt", res.to_text())
    emit_plot_tables(out)
    return 0


def cmd_concentration(cfg: RunConfig, out: Path, resume=None) -> int:
    path = Path(resume) if resume is not None else out / CHECKPOINT
    if not path.exists():
        raise CommandError(f"no checkpoint at {path}; pass --resume")
    state, meta = load_checkpoint_state(path)
    prof = _profile(out)
    rep = concentration_scan(state, prof.mass, cfg.diagnostics.radii)
    text = rep.to_text()
    try:
        snap = rescale_snapshot(state, meta["current_N"], cfg.physics.s)
        text += (
            f"rescaled lambda {float(snap.lam)!r} l2 {float(snap.l2)!r} grad_l2 {float(snap.grad_l2)!r} "
            f"E_tilde {float(snap.E_tilde)!r} H1_tilde {float(snap.H1_tilde)!r}\n"
        )
    except ValueError as exc:
        text += f"rescaled unavailable: {exc}\n"
    _write(out / "concentration.txt", text)
    emit_plot_tables(out)
    return 0


COMMANDS = {
    "ground-state": cmd_ground_state,
    "simulate": cmd_simulate,
    "probe": cmd_probe,
    "sweep": cmd_sweep,
    "concentration": cmd_concentration,
}


# --------------------------------------------------------------------------
# plot tables


def _two_col(path: Path, xs, ys) -> None:
    path.write_text("".join(f"{float(x)!r} {float(y)!r}\n" for x, y in zip(xs, ys)))


def emit_plot_tables(run_dir) -> list[Path]:
    """Write two-column text tables under ``run_dir/tables`` from whatever outputs exist."""
    run_dir = Path(run_dir)
    tables = run_dir / "tables"
    found = []
    ts = run_dir / TIMESERIES
    if ts.exists():
        rows = read_timeseries(ts)
        tables.mkdir(exist_ok=True)
        for col in TimeSeriesRecord.columns()[1:]:
            p = tables / f"{col}.txt"
            _two_col(p, [r.t for r in rows], [getattr(r, col) for r in rows])
            found.append(p)
    conc = run_dir / "concentration.txt"
    if conc.exists():
        tables.mkdir(exist_ok=True)
        label, rows = None, {}
        for line in conc.read_text().splitlines():
            parts = line.split()
            if parts[:1] == ["center"]:
                label = parts[1]
                rows[label] = []
            elif label and len(parts) == 4 and parts[0] != "R":
                rows[label].append((float(parts[0]), float(parts[1])))
        for label, pts in rows.items():
            pts.sort()
            p = tables / f"ball_mass_{label}.txt"
            _two_col(p, [a for a, _ in pts], [b for _, b in pts])
            found.append(p)
    sweep = run_dir / "sweep.txt"
    if sweep.exists():
        tables.mkdir(exist_ok=True)
        lines = sweep.read_text().splitlines()
        start = lines.index("N drift") + 1
        pts = [tuple(map(float, ln.split())) for ln in lines[start:] if ln.strip()]
        p = tables / "log_drift.txt"
        _two_col(p, [math.log(N) for N, _ in pts], [math.log(d) if d > 0 else float("-inf") for _, d in pts])
        found.append(p)
    if not found:
        raise CommandError(f"{run_dir}: missing series (no {TIMESERIES}, concentration.txt or sweep.txt)")
    return found


# --------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zlab", description="Zakharov I-method simulator and diagnostics")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="INI configuration file (defaults apply when omitted)")
    ap.add_argument("--resume", help="checkpoint to restart from (simulate) or to scan (concentration)")
    ap.add_argument("--out", help="output directory (overrides run.output_dir)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        text = Path(args.config).read_text() if args.config else ""
        cfg = parse_config(text)
    except (OSError, ConfigError) as exc:
        print(f"zlab: config: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out or cfg.run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(serialize_config(cfg))
    try:
        return COMMANDS[args.command](cfg, out, args.resume)
    except Exception as exc:  # report the failing operation, exit nonzero
        print(f"zlab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
