"""Run configuration: sectioned INI text with strict keys and full validation."""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace
from typing import Optional

from .diagnostics import STRICHARTZ_KINDS, check_strichartz_pair
from .dynamics import StepControl
from .energetics import ScheduleError, check_schedule_params
from .spectral import Grid2D

U_PRESETS = ("gaussian", "townes_scaled", "plane_wave", "zero", "file")
N_PRESETS = ("zero", "minus_density", "gaussian")
W_PRESETS = ("zero", "gaussian")
PROBE_KINDS = ("bilinear",) + STRICHARTZ_KINDS


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


Floats = tuple  # marker for comma-separated float lists


@dataclass(frozen=True)
class GridSection:
    M: int = 128
    L: float = 32.0


@dataclass(frozen=True)
class PhysicsSection:
    s: float = 0.95
    coupling: bool = True
    dealias: bool = True
    u_preset: str = "gaussian"
    u_params: Floats = (1.0, 1.0)
    n_preset: str = "zero"
    n_params: Floats = ()
    w_preset: str = "zero"
    w_params: Floats = ()
    radial_required: bool = False
    u_file: str = ""


@dataclass(frozen=True)
class ScheduleSection:
    eps: float = 1e-3
    N_min: float = 1.0
    N_max: Optional[float] = None  # None: the grid's n_max
    fixed_N: Optional[float] = None
    lambda_ref: Optional[float] = None  # None: the initial ||u||_{H^s}


@dataclass(frozen=True)
class SteppingSection:
    dt_base: float = 1e-3
    dt_min: float = 1e-7
    c_local: float = 1.0
    tail_fraction_max: float = 0.05
    growth_factor: float = 10.0
    t_end: float = 1.0
    adaptive: bool = True
    max_steps: int = 10_000_000


@dataclass(frozen=True)
class DiagnosticsSection:
    stride: int = 10
    radii: Floats = (0.1, 0.25, 0.5, 1.0, 2.0, 4.0)
    checkpoint_every: int = 0  # steps between checkpoints; 0 writes only the final one


@dataclass(frozen=True)
class ProbeSection:
    """Probes run on their own box; the default suits the bilinear ladder."""

    kind: str = "bilinear"
    M: int = 256
    L: float = 12.566370614359172  # 4 pi
    N1: float = 1.0
    ratios: Floats = (2.0, 4.0, 8.0, 16.0)
    delta: Optional[float] = None
    trials: int = 8
    q: float = 4.0
    r: float = 4.0
    T: float = 0.25
    dilation: float = 2.0


@dataclass(frozen=True)
class SweepSection:
    """The drift sweep runs on its own small box so the whole ladder is resolvable."""

    M: int = 128
    L: float = 2.0
    N_ladder: Floats = (8.0, 16.0, 32.0, 64.0)
    dt: float = 1e-5
    window: float = 0.05
    decay: float = 2.0


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    output_dir: str = "zlab_out"


SECTIONS = {
    "grid": GridSection,
    "physics": PhysicsSection,
    "schedule": ScheduleSection,
    "stepping": SteppingSection,
    "diagnostics": DiagnosticsSection,
    "probe": ProbeSection,
    "sweep": SweepSection,
    "run": RunSection,
}


@dataclass(frozen=True)
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    stepping: SteppingSection = field(default_factory=SteppingSection)
    diagnostics: DiagnosticsSection = field(default_factory=DiagnosticsSection)
    probe: ProbeSection = field(default_factory=ProbeSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    run: RunSection = field(default_factory=RunSection)

    def with_section(self, name: str, **changes) -> "RunConfig":
        return replace(self, **{name: replace(getattr(self, name), **changes)})


# --------------------------------------------------------------------------
# value conversion

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _convert(kind, text: str):
    text = text.strip()
    if kind is bool:
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind is str:
        return text
    if kind == "Optional[float]":
        return None if text.lower() in ("", "none") else float(text)
    if kind == "Floats":
        return tuple(float(v) for v in text.replace(",", " ").split())
    raise AssertionError(kind)


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _field_kind(f):
    return f.type if f.type in ("Optional[float]", "Floats") else {"int": int, "float": float, "bool": bool, "str": str}[f.type]


# --------------------------------------------------------------------------
# parse / serialize


def parse_config(text: str) -> RunConfig:
    """Parse and validate; every problem found is reported together."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"malformed config: {exc}"]) from exc
    problems: list[str] = []
    sections = {}
    for name in cp.sections():
        if name not in SECTIONS:
            problems.append(f"unknown section [{name}]")
    for name, cls in SECTIONS.items():
        known = {f.name: f for f in fields(cls)}
        values = {}
        if cp.has_section(name):
            for key, raw in cp.items(name):
                if key not in known:
                    problems.append(f"unknown key {name}.{key}")
                    continue
                try:
                    values[key] = _convert(_field_kind(known[key]), raw)
                except ValueError as exc:
                    problems.append(f"{name}.{key}: {exc}")
        sections[name] = cls(**values)
    cfg = RunConfig(**sections)
    problems += validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    for name in SECTIONS:
        sec = getattr(cfg, name)
        cp[name] = {f.name: _format(getattr(sec, f.name)) for f in fields(sec)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _box(p: list, where: str, M, L):
    try:
        return Grid2D(M, L)
    except ValueError as exc:
        p.append(f"{where}: {exc}")
        return None


def validate(cfg: RunConfig) -> list[str]:
    p: list[str] = []
    g = cfg.grid
    grid = _box(p, "grid", g.M, g.L)

    ph = cfg.physics
    if not 0 < ph.s < 1:
        p.append(f"physics.s must lie in (0, 1), got {ph.s}")
    if ph.u_preset not in U_PRESETS:
        p.append(f"physics.u_preset must be one of {U_PRESETS}, got {ph.u_preset!r}")
    if ph.n_preset not in N_PRESETS:
        p.append(f"physics.n_preset must be one of {N_PRESETS}, got {ph.n_preset!r}")
    if ph.w_preset not in W_PRESETS:
        p.append(f"physics.w_preset must be one of {W_PRESETS}, got {ph.w_preset!r}")
    arity = {"gaussian": 2, "townes_scaled": 2, "plane_wave": 3, "zero": 0, "file": 0}
    if ph.u_preset in arity and len(ph.u_params) != arity[ph.u_preset]:
        p.append(f"physics.u_params: preset {ph.u_preset} takes {arity[ph.u_preset]} values, got {len(ph.u_params)}")
    for key, preset, params in (("n", ph.n_preset, ph.n_params), ("w", ph.w_preset, ph.w_params)):
        want = 2 if preset == "gaussian" else 0
        if len(params) != want:
            p.append(f"physics.{key}_params: preset {preset} takes {want} values, got {len(params)}")
    if ph.u_preset == "file" and not ph.u_file:
        p.append("physics.u_file is required with u_preset = file")

    sc = cfg.schedule
    if sc.fixed_N is None:
        try:
            check_schedule_params(ph.s, sc.eps)
        except ScheduleError as exc:
            p.append(f"schedule: {exc}")
    elif not sc.fixed_N > 0:
        p.append("schedule.fixed_N must be positive")
    n_max = sc.N_max if sc.N_max is not None else (grid.n_max if grid else None)
    if not sc.N_min > 0 or (n_max is not None and sc.N_min > n_max):
        p.append(f"schedule: need 0 < N_min <= N_max, got N_min={sc.N_min}, N_max={n_max}")
    if sc.lambda_ref is not None and not sc.lambda_ref > 0:
        p.append("schedule.lambda_ref must be positive")

    st = cfg.stepping
    try:
        StepControl(st.dt_base, st.c_local, sc.eps, st.dt_min, st.tail_fraction_max, st.growth_factor, st.adaptive)
    except ValueError as exc:
        p.append(f"stepping: {exc}")
    if not st.t_end > 0:
        p.append("stepping.t_end must be positive")
    if st.max_steps < 1:
        p.append("stepping.max_steps must be at least 1")

    d = cfg.diagnostics
    if d.stride < 1:
        p.append("diagnostics.stride must be at least 1")
    if d.checkpoint_every < 0:
        p.append("diagnostics.checkpoint_every must be nonnegative")
    if not d.radii or any(R <= 0 for R in d.radii):
        p.append("diagnostics.radii must be a nonempty list of positive radii")
    elif grid and max(d.radii) > 0.5 * grid.L:
        p.append(f"diagnostics.radii must not exceed L/2 = {0.5 * grid.L}")

    pr = cfg.probe
    pgrid = _box(p, "probe", pr.M, pr.L)
    if pr.kind not in PROBE_KINDS:
        p.append(f"probe.kind must be one of {PROBE_KINDS}, got {pr.kind!r}")
    elif pr.kind == "bilinear":
        if len(pr.ratios) < 4:
            p.append("probe.ratios needs at least 4 ladder points")
        if any(r < 1 for r in pr.ratios):
            p.append("probe.ratios must be >= 1 (N1 <= N2)")
        if not pr.N1 > 0:
            p.append("probe.N1 must be positive")
        elif pgrid and pr.ratios and 2 * pr.N1 * max(pr.ratios) > pgrid.kmax / 1.5:
            p.append(f"probe: top scale 2 N1 max(ratios) exceeds 2/3 of the probe box kmax = {pgrid.kmax:.6g}")
    else:
        try:
            check_strichartz_pair(pr.kind, pr.q, pr.r)
        except ValueError as exc:
            p.append(f"probe: {exc}")
    if pr.trials < 1:
        p.append("probe.trials must be at least 1")
    if pr.delta is not None and not pr.delta > 0:
        p.append("probe.delta must be positive")

    sw = cfg.sweep
    sgrid = _box(p, "sweep", sw.M, sw.L)
    if len(sw.N_ladder) < 2 or any(N <= 0 for N in sw.N_ladder):
        p.append("sweep.N_ladder needs at least two positive entries")
    elif sgrid and max(sw.N_ladder) > sgrid.n_max:
        p.append(f"sweep.N_ladder entry {max(sw.N_ladder)} exceeds the sweep box N_max = {sgrid.n_max:.6g}")
    if not sw.dt > 0 or not sw.window > 0:
        p.append("sweep.dt and sweep.window must be positive")
    return p
