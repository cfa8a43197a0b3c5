"""Split-step integration of the Zakharov system in (u, n, nu) variables.

Evolving ``n_plus = n + i nu`` with nu = Lambda^{-1} n_t turns the wave
equation into the half-wave equation (i d/dt - Lambda) n_plus = Lambda |u|^2.
Each Strang step alternates the exact Fourier linear flows with the exact
nonlinear subflow (u rotated by exp(-i n dt), nu kicked by -dt Lambda |u|^2),
so mass is conserved to roundoff and the scheme is time-symmetric.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field, fields
from enum import IntEnum
from pathlib import Path

import numpy as np

from .energetics import ISchedule, energy_report, i_symbol
from .groundstate import RadialProfile, project_to_grid
from .spectral import Grid2D, boundary_ratio, fft2, ifft2, radial_defect, read_field
from .state import ZakharovState


class IntegrationFailure(RuntimeError):
    def __init__(self, t: float, what: str):
        super().__init__(f"non-finite values in {what} at t={float(t)!r}")
        self.t = t


class Stop(IntEnum):
    RUNNING = 0
    T_END = 1
    BLOWUP = 2
    RESOLUTION = 3
    FAILURE = 4
    MAX_STEPS = 5


# --------------------------------------------------------------------------
# the split step


def strang_step(state: ZakharovState, dt: float, coupling: bool = True, dealias: bool = True) -> ZakharovState:
    if dt == 0:
        raise ValueError("dt must be nonzero")
    g = state.grid
    u, n, nu = state.arrays()
    half_s = np.exp(-0.5j * dt * g.k2)
    half_w = np.exp(-0.5j * dt * g.kabs)

    u = ifft2(half_s * fft2(u))
    ph = half_w * fft2(n + 1j * nu)
    if coupling:
        n_mid = ifft2(ph).real
        u = np.exp(-1j * dt * n_mid) * u
        rho_h = fft2(np.abs(u) ** 2)
        if dealias:
            rho_h = np.where(g.dealias_mask, rho_h, 0.0)
        ph = ph - 1j * dt * g.kabs * rho_h
    u = ifft2(half_s * fft2(u))
    p = ifft2(half_w * ph)
    n_new, nu_new = p.real, p.imag
    nu_new = nu_new - nu_new.mean()
    t_new = state.t + dt
    for what, a in (("u", u), ("n", n_new), ("nu", nu_new)):
        if not np.all(np.isfinite(a)):
            raise IntegrationFailure(t_new, what)
    return ZakharovState.from_arrays(g, t_new, u, n_new, nu_new)


# --------------------------------------------------------------------------
# step control


@dataclass(frozen=True)
class StepControl:
    dt_base: float = 1e-3
    c_local: float = 1.0
    eps: float = 1e-3
    dt_min: float = 1e-7
    tail_fraction_max: float = 0.05
    growth_factor: float = 10.0
    adaptive: bool = True

    def __post_init__(self):
        if not self.dt_base > self.dt_min > 0:
            raise ValueError(f"need dt_base > dt_min > 0, got {self.dt_base}, {self.dt_min}")
        if not 0 < self.eps <= 0.05:
            raise ValueError(f"step-law eps must lie in (0, 0.05], got {self.eps}")
        if not 0 < self.tail_fraction_max < 1:
            raise ValueError(f"tail_fraction_max must lie in (0, 1), got {self.tail_fraction_max}")
        if not self.c_local > 0:
            raise ValueError("c_local must be positive")
        if not self.growth_factor > 1:
            raise ValueError("growth_factor must exceed 1")


def step_delta(in_plus_norm: float, iu_h1: float, c: float, eps: float) -> float:
    """min{(c/||In+||)^(2+17eps), (c ||In+|| / ||Iu||_{H1}^2)^(2+17eps)}."""
    power = 2.0 + 17.0 * eps
    first = math.inf if in_plus_norm == 0 else (c / in_plus_norm) ** power
    if iu_h1 == 0:
        second = math.inf
    else:
        second = (c * in_plus_norm / iu_h1**2) ** power
    return min(first, second)


def monitor_norms(state: ZakharovState, N: float, s: float) -> dict:
    g = state.grid
    u, n, nu = state.arrays()
    w = g.spectral_sq_weight()
    m = i_symbol(g, N, s)
    uh = fft2(u)
    ph = fft2(n + 1j * nu)
    b2 = g.bracket**2
    return {
        "u_hs": math.sqrt(w * np.sum(b2**s * np.abs(uh) ** 2)),
        "iu_h1": math.sqrt(w * np.sum(b2 * np.abs(m * uh) ** 2)),
        "nplus_l2": math.sqrt(w * np.sum(np.abs(ph) ** 2)),
        "inplus_h1ms": math.sqrt(w * np.sum(b2 ** (1.0 - s) * np.abs(m * ph) ** 2)),
    }


def local_step_delta(state: ZakharovState, N: float, s: float, control: StepControl, norms: dict | None = None) -> float:
    norms = norms or monitor_norms(state, N, s)
    if norms["inplus_h1ms"] == 0 and norms["iu_h1"] == 0:
        return control.dt_base
    delta = step_delta(norms["inplus_h1ms"], norms["iu_h1"], control.c_local, control.eps)
    return max(min(control.dt_base, delta), control.dt_min)


def resolution_guard(state: ZakharovState) -> float:
    """Fraction of ||u||^2 outside the inner 2/3 box of frequency space."""
    g = state.grid
    e = np.abs(fft2(state.u.physical())) ** 2
    total = e.sum()
    if total == 0:
        return 0.0
    return float(e[~g.dealias_mask].sum() / total)


@dataclass(frozen=True)
class MonitorRecord:
    Lambda: float
    u_hs: float
    nplus_l2: float
    iu_h1: float
    inplus_h1ms: float
    blowup: bool


def blowup_monitor(
    state: ZakharovState,
    N: float,
    s: float,
    running_max: float = 0.0,
    initial_hs: float | None = None,
    growth_factor: float = 10.0,
) -> MonitorRecord:
    nm = monitor_norms(state, N, s)
    hs = nm["u_hs"]
    ref = hs if initial_hs is None else initial_hs
    return MonitorRecord(
        Lambda=max(running_max, hs),
        u_hs=hs,
        nplus_l2=nm["nplus_l2"],
        iu_h1=nm["iu_h1"],
        inplus_h1ms=nm["inplus_h1ms"],
        blowup=bool(ref > 0 and hs > growth_factor * ref),
    )


# --------------------------------------------------------------------------
# initial data


@dataclass(frozen=True)
class InitialData:
    """Presets for (u0, n0, w0); n1 = -Delta w0 so nu0 = Lambda w0.

    u presets: ``gaussian`` (A, sigma), ``townes_scaled`` (mu, mass_ratio),
    ``plane_wave`` (A, kx, ky: integer mode indices), ``zero``, ``file`` (path).
    n presets: ``zero``, ``minus_density`` (n0 = -|u0|^2), ``gaussian`` (B, sigma).
    w presets: ``zero``, ``gaussian`` (C, sigma).
    """

    u_preset: str = "gaussian"
    u_params: tuple = (1.0, 1.0)
    n_preset: str = "zero"
    n_params: tuple = ()
    w_preset: str = "zero"
    w_params: tuple = ()
    radial_required: bool = False
    file: str = ""


def _gaussian(grid: Grid2D, amp: float, sigma: float) -> np.ndarray:
    return amp * np.exp(-(grid.radius**2) / (2.0 * sigma**2))


def build_initial_state(
    init: InitialData,
    grid: Grid2D,
    profile: RadialProfile | None = None,
    dealias: bool = True,
) -> tuple[ZakharovState, dict]:
    diag: dict = {}
    p = init.u_params
    if init.u_preset == "gaussian":
        u0 = _gaussian(grid, *p).astype(complex)
    elif init.u_preset == "townes_scaled":
        if profile is None:
            raise ValueError("townes_scaled initial data needs a ground-state profile")
        mu, mass_ratio = p
        f, d = project_to_grid(profile, grid, scale=mu, amplitude=math.sqrt(mass_ratio))
        diag.update(d)
        u0 = f.data
    elif init.u_preset == "plane_wave":
        amp, jx, jy = p
        X, Y = grid.mesh
        u0 = amp * np.exp(2j * np.pi * (jx * X + jy * Y) / grid.L)
    elif init.u_preset == "zero":
        u0 = np.zeros(grid.shape, dtype=complex)
    elif init.u_preset == "file":
        f = read_field(init.file)
        if f.grid != grid:
            raise ValueError(f"snapshot grid {f.grid} does not match run grid {grid}")
        u0 = f.physical().astype(complex)
    else:
        raise ValueError(f"unknown u preset {init.u_preset!r}")

    if init.n_preset == "zero":
        n0 = np.zeros(grid.shape)
    elif init.n_preset == "minus_density":
        n0 = -np.abs(u0) ** 2
    elif init.n_preset == "gaussian":
        n0 = _gaussian(grid, *init.n_params)
    else:
        raise ValueError(f"unknown n preset {init.n_preset!r}")

    if init.w_preset == "zero":
        nu0 = np.zeros(grid.shape)
    elif init.w_preset == "gaussian":
        w0 = _gaussian(grid, *init.w_params)
        nu0 = ifft2(grid.kabs * fft2(w0)).real
    else:
        raise ValueError(f"unknown w preset {init.w_preset!r}")

    if dealias:
        n0 = ifft2(np.where(grid.dealias_mask, fft2(n0), 0.0)).real
        nu0 = ifft2(np.where(grid.dealias_mask, fft2(nu0), 0.0)).real
    nu0 = nu0 - nu0.mean()

    diag["boundary_ratio"] = max(boundary_ratio(u0), boundary_ratio(n0), boundary_ratio(nu0))
    diag["decay_ok"] = diag["boundary_ratio"] < 1e-8
    state = ZakharovState.from_arrays(grid, 0.0, u0, n0, nu0)
    if init.radial_required:
        defects = {k: radial_defect(getattr(state, k)) for k in ("u", "n", "nu")}
        bad = {k: v for k, v in defects.items() if v > 1e-8}
        if bad:
            raise ValueError(f"radial data required but radial_defect exceeds 1e-8: {bad}")
    return state, diag


# --------------------------------------------------------------------------
# time series


@dataclass(frozen=True)
class TimeSeriesRecord:
    t: float
    dt: float
    N: float
    mass: float
    H_vform: float
    modified_H: float
    E_Iu: float
    H1: float
    u_hs: float
    iu_h1: float
    nplus_l2: float
    inplus_h1ms: float
    tail_fraction: float
    stop_flag: int

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_row(self) -> str:
        return " ".join(repr(int(v)) if isinstance(v, (bool, int, np.integer)) else repr(float(v)) for v in asdict(self).values())

    @classmethod
    def from_row(cls, row: str) -> "TimeSeriesRecord":
        vals = row.split()
        kw = {}
        for f, v in zip(fields(cls), vals):
            kw[f.name] = int(v) if f.name == "stop_flag" else float(v)
        return cls(**kw)


def read_timeseries(path) -> list[TimeSeriesRecord]:
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        try:
            rows.append(TimeSeriesRecord.from_row(line))
        except (ValueError, TypeError):
            break  # torn final row of a killed run
    return rows


# --------------------------------------------------------------------------
# integrator


@dataclass
class Simulation:
    """Sequential trajectory with step control, schedule and monitors.

    Everything the future of the run depends on lives here, so a checkpoint
    of this object restarts bit-exactly.
    """

    state: ZakharovState
    s: float
    schedule: ISchedule
    control: StepControl
    t_end: float
    coupling: bool = True
    dealias: bool = True
    max_steps: int = 10**7
    step_count: int = 0
    lambda_max: float = 0.0
    initial_hs: float = 0.0
    stop: Stop = Stop.RUNNING
    config_hash: str = ""
    failure: str = field(default="")

    def __post_init__(self):
        if self.initial_hs == 0.0:
            nm = monitor_norms(self.state, self.schedule.current_N, self.s)
            self.initial_hs = nm["u_hs"]
            self.lambda_max = max(self.lambda_max, nm["u_hs"])
            self.schedule.update(self.lambda_max)

    @property
    def N(self) -> float:
        return self.schedule.current_N

    def record(self, dt: float = 0.0, norms: dict | None = None, tail: float | None = None) -> TimeSeriesRecord:
        N = self.N
        rep = energy_report(self.state, N, self.s)
        nm = norms or monitor_norms(self.state, N, self.s)
        return TimeSeriesRecord(
            t=self.state.t,
            dt=dt,
            N=N,
            mass=rep.mass,
            H_vform=rep.H_vform,
            modified_H=rep.modified_H,
            E_Iu=rep.E_Iu,
            H1=rep.H1,
            u_hs=nm["u_hs"],
            iu_h1=nm["iu_h1"],
            nplus_l2=nm["nplus_l2"],
            inplus_h1ms=nm["inplus_h1ms"],
            tail_fraction=resolution_guard(self.state) if tail is None else tail,
            stop_flag=int(self.stop),
        )

    def next_dt(self) -> float:
        if self.control.adaptive:
            dt = local_step_delta(self.state, self.N, self.s, self.control)
        else:
            dt = self.control.dt_base
        remaining = self.t_end - self.state.t
        # avoid a sliver step at the end
        if dt >= remaining or remaining - dt < 1e-12 * max(1.0, self.t_end):
            dt = remaining
        return dt

    def advance(self) -> float:
        """One accepted step; updates monitors and the stop reason. Returns dt.

        ``last_step`` then holds (dt, tail_fraction, monitor norms) of this step.
        """
        dt = self.next_dt()
        try:
            self.state = strang_step(self.state, dt, self.coupling, self.dealias)
        except IntegrationFailure as exc:
            self.stop = Stop.FAILURE
            self.failure = str(exc)
            raise
        self.step_count += 1
        nm = monitor_norms(self.state, self.N, self.s)
        self.lambda_max = max(self.lambda_max, nm["u_hs"])
        self.schedule.update(self.lambda_max)
        tail = resolution_guard(self.state)
        if self.state.t >= self.t_end:
            self.stop = Stop.T_END
        elif self.initial_hs > 0 and nm["u_hs"] > self.control.growth_factor * self.initial_hs:
            self.stop = Stop.BLOWUP
        elif tail > self.control.tail_fraction_max:
            self.stop = Stop.RESOLUTION
        elif self.step_count >= self.max_steps:
            self.stop = Stop.MAX_STEPS
        self.last_step = (dt, tail, nm)
        return dt

    def last_record(self) -> TimeSeriesRecord:
        dt, tail, nm = self.last_step
        return self.record(dt, norms=nm, tail=tail)

    # checkpointing ---------------------------------------------------------

    def checkpoint(self, path) -> None:
        u, n, nu = self.state.arrays()
        np.savez(
            path,
            config_hash=np.array(self.config_hash),
            t=np.array(self.state.t),
            step=np.array(self.step_count),
            lambda_max=np.array(self.lambda_max),
            initial_hs=np.array(self.initial_hs),
            current_N=np.array(self.schedule.current_N),
            M=np.array(self.state.grid.M),
            L=np.array(self.state.grid.L),
            u=u,
            n=n,
            nu=nu,
        )

    def restore(self, path) -> None:
        with np.load(path) as ck:
            if self.config_hash and str(ck["config_hash"]) != self.config_hash:
                raise ValueError(f"checkpoint {path} was written by a different configuration")
            grid = Grid2D(int(ck["M"]), float(ck["L"]))
            if grid != self.state.grid:
                raise ValueError("checkpoint grid does not match configuration")
            self.state = ZakharovState.from_arrays(grid, float(ck["t"]), ck["u"], ck["n"], ck["nu"])
            self.step_count = int(ck["step"])
            self.lambda_max = float(ck["lambda_max"])
            self.initial_hs = float(ck["initial_hs"])
            self.schedule.current_N = float(ck["current_N"])
        self.stop = Stop.RUNNING


def load_checkpoint_state(path) -> tuple[ZakharovState, dict]:
    with np.load(path) as ck:
        grid = Grid2D(int(ck["M"]), float(ck["L"]))
        state = ZakharovState.from_arrays(grid, float(ck["t"]), ck["u"], ck["n"], ck["nu"])
        meta = {k: ck[k].item() for k in ("config_hash", "step", "lambda_max", "initial_hs", "current_N")}
    return state, meta


def integrate(sim: Simulation, stride: int = 1, emit_initial: bool = True):
    """Advance ``sim`` until a stop condition and yield TimeSeriesRecords.

    The initial state is emitted first (dt = 0); afterwards every ``stride``-th
    accepted step is emitted, and the final record always is. On an
    integration failure the last good state is emitted flagged FAILURE,
    unless it was already written, so times stay strictly increasing.
    """
    emitted = -1
    if emit_initial and sim.step_count == 0:
        yield sim.record(0.0)
        emitted = 0
    while sim.stop == Stop.RUNNING:
        try:
            sim.advance()
        except IntegrationFailure:
            if emitted != sim.step_count:
                yield sim.record(0.0)
            return
        if sim.stop != Stop.RUNNING or sim.step_count % stride == 0:
            yield sim.last_record()
            emitted = sim.step_count


def config_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]
