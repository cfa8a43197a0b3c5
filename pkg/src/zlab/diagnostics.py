"""Concentration scans, rescaled snapshots, linear-flow estimate probes and
the modified-energy drift regression.

The estimate probes only ever use free evolutions, which are exact in
Fourier space, so they are independent of the split-step integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import strang_step
from .energetics import energy_E, energy_H1, i_symbol, modified_energy
from .spectral import Field2D, Grid2D, ball_mass, fft2, ifft2
from .state import ZakharovState

# --------------------------------------------------------------------------
# concentration


@dataclass(frozen=True)
class ConcentrationReport:
    """Ball masses around the origin and around the maximum of |u|.

    ``u_ball_mass``, ``n_ball_l1`` and ``q_mass_ratio`` map a centre label
    ("origin" or "argmax") to an array aligned with ``radii``.
    """

    t: float
    radii: np.ndarray
    centers: dict
    u_ball_mass: dict
    n_ball_l1: dict
    q_mass_ratio: dict
    total_mass: float

    def to_text(self) -> str:
        lines = [f"t {float(self.t)!r}", f"total_mass {float(self.total_mass)!r}"]
        for label, (cx, cy) in self.centers.items():
            lines.append(f"center {label} {float(cx)!r} {float(cy)!r}")
            lines.append("R u_ball_mass n_ball_l1 q_mass_ratio")
            for i, R in enumerate(self.radii):
                lines.append(
                    f"{float(R)!r} {float(self.u_ball_mass[label][i])!r} {float(self.n_ball_l1[label][i])!r} {float(self.q_mass_ratio[label][i])!r}"
                )
        return "\n".join(lines) + "\n"


def argmax_center(u: Field2D) -> tuple[float, float]:
    a = np.abs(u.physical())
    i, j = np.unravel_index(int(np.argmax(a)), a.shape)
    x = u.grid.x
    return float(x[i]), float(x[j])


def concentration_scan(state: ZakharovState, profile_mass: float, radii) -> ConcentrationReport:
    if not profile_mass > 0:
        raise ValueError("ground-state mass must be positive")
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    g = state.grid
    if radii.size == 0 or radii[0] > 0.5 * g.L:
        raise ValueError(f"radii must be nonempty and at most L/2 = {0.5 * g.L}")
    centers = {"origin": (0.0, 0.0), "argmax": argmax_center(state.u)}
    u_mass, n_l1, ratio = {}, {}, {}
    for label, c in centers.items():
        um = np.array([ball_mass(state.u, 2, R, c) for R in radii])
        u_mass[label] = um
        n_l1[label] = np.array([ball_mass(state.n, 1, R, c) for R in radii])
        ratio[label] = um / profile_mass
    total = float(g.cell_area * np.sum(np.abs(state.u.physical()) ** 2))
    return ConcentrationReport(state.t, radii, centers, u_mass, n_l1, ratio, total)


# --------------------------------------------------------------------------
# rescaled snapshots


@dataclass(frozen=True)
class RescaledSnapshot:
    t: float
    lam: float
    u_tilde: Field2D
    n_tilde: Field2D
    l2: float
    grad_l2: float
    l4_fourth: float
    n_l2_sq: float
    E_tilde: float
    H1_tilde: float
    E_Iu: float
    grad_Iu_l2: float
    l2_Iu: float
    mode: str
    flagged: bool = False
    notes: tuple = ()

    def scaling_defects(self) -> dict:
        """Relative defects of the three dilation identities."""
        lam2 = self.lam**2
        out = {
            "l2": abs(self.l2 - self.l2_Iu) / max(self.l2_Iu, 1e-300),
            "grad": abs(self.grad_l2 - self.grad_Iu_l2 / self.lam) / max(self.grad_Iu_l2 / self.lam, 1e-300),
        }
        scale = max(abs(self.E_Iu / lam2), self.grad_l2**2, 1e-300)
        out["energy"] = abs(self.E_tilde - self.E_Iu / lam2) / scale
        return out


def _trig_resample(a: np.ndarray, grid: Grid2D, factor: float) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``a`` at the points x / factor."""
    ah = fft2(a) / grid.M**2
    # sample index 0 sits at x = -L/2, so phases are measured from there
    E = np.exp(1j * np.outer(grid.x / factor - grid.x[0], grid.k))
    return E @ ah @ E.T


def rescale_snapshot(state: ZakharovState, N: float, s: float, mode: str = "grid", resolve_tol: float = 1e-6) -> RescaledSnapshot:
    """u~(x) = lam^-1 Iu(x/lam), n~(x) = lam^-2 In(x/lam) with lam = ||Iu||_{H^1}.

    ``mode="grid"`` represents the dilated fields on the dilated torus of
    side lam L with the same sample values scaled, which is exact for every
    lam. ``mode="interpolate"`` keeps the original box and evaluates the
    trigonometric interpolant at x / lam; only the central 1/lam of the
    torus is seen, so the result is flagged when Iu carries more than
    ``resolve_tol`` of its mass outside that window.
    """
    g = state.grid
    m = i_symbol(g, N, s)
    u, n, _ = state.arrays()
    Iu = ifft2(m * fft2(u))
    In = ifft2(m * fft2(n)).real
    w2 = g.spectral_sq_weight()
    Iuh = fft2(Iu)
    lam = math.sqrt(w2 * np.sum(g.bracket**2 * np.abs(Iuh) ** 2))
    if lam < 1.0:
        raise ValueError(f"rescaling needs lambda = ||Iu||_H1 >= 1, got {lam:.6g}")
    grad_Iu = math.sqrt(w2 * np.sum(g.k2 * np.abs(Iuh) ** 2))
    l2_Iu = math.sqrt(g.cell_area * np.sum(np.abs(Iu) ** 2))
    E_Iu = energy_E(g, Iu)

    notes = []
    flagged = False
    if mode == "grid":
        g2 = Grid2D(g.M, lam * g.L)
        ut = Iu / lam
        nt = In / lam**2
    elif mode == "interpolate":
        g2 = g
        ut = _trig_resample(Iu, g, lam) / lam
        nt = _trig_resample(In, g, lam).real / lam**2
        X, Y = g.mesh
        outside = (np.abs(X) >= 0.5 * g.L / lam) | (np.abs(Y) >= 0.5 * g.L / lam)
        lost = float(np.sum(np.abs(Iu[outside]) ** 2) / max(np.sum(np.abs(Iu) ** 2), 1e-300))
        if lost > resolve_tol:
            flagged = True
            notes.append(f"Iu carries {lost:.3e} of its mass outside the zoom window")
    else:
        raise ValueError(f"unknown rescaling mode {mode!r}")

    uth = fft2(ut)
    w2b = g2.spectral_sq_weight()
    grad_sq = float(w2b * np.sum(g2.k2 * np.abs(uth) ** 2))
    return RescaledSnapshot(
        t=state.t,
        lam=lam,
        u_tilde=Field2D(g2, ut.astype(complex), name="u_tilde"),
        n_tilde=Field2D(g2, nt.astype(complex), name="n_tilde"),
        l2=math.sqrt(g2.cell_area * np.sum(np.abs(ut) ** 2)),
        grad_l2=math.sqrt(grad_sq),
        l4_fourth=float(g2.cell_area * np.sum(np.abs(ut) ** 4)),
        n_l2_sq=float(g2.cell_area * np.sum(nt**2)),
        E_tilde=energy_E(g2, ut),
        H1_tilde=energy_H1(g2, ut, nt),
        E_Iu=E_Iu,
        grad_Iu_l2=grad_Iu,
        l2_Iu=l2_Iu,
        mode=mode,
        flagged=flagged,
        notes=tuple(notes),
    )


# --------------------------------------------------------------------------
# estimate probes


@dataclass(frozen=True)
class ProbeResult:
    estimate_id: str
    samples: list
    fitted_exponent: float
    fit_r2: float
    extra: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [
            f"estimate_id {self.estimate_id}",
            f"fitted_exponent {float(self.fitted_exponent)!r}",
            f"fit_r2 {float(self.fit_r2)!r}",
        ]
        for k, v in sorted(self.extra.items()):
            lines.append(f"{k} {_plain(v)!r}")
        lines.append("param measured_lhs reference_rhs_shape")
        for p, lhs, ref in self.samples:
            lines.append(f"{float(p)!r} {float(lhs)!r} {float(ref)!r}")
        return "\n".join(lines) + "\n"


def _plain(v):
    """Unwrap numpy scalars so reprs read as bare numbers."""
    return v.item() if isinstance(v, np.generic) else v


def loglog_fit(x, y) -> tuple[float, float]:
    """Least-squares slope of log y against log x, and its R^2."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid**2) / ss) if ss > 0 else 1.0
    return float(coef[0]), r2


def _band_data(grid: Grid2D, lo: float, hi: float, rng: np.random.Generator) -> np.ndarray:
    """Random positive amplitudes on lo <= |xi| < hi, all in phase at the origin."""
    band = (grid.kabs >= lo) & (grid.kabs < hi)
    if not band.any():
        raise ValueError(f"no grid modes with {lo} <= |xi| < {hi}")
    # phases exp(-i xi.x0) with x0 = 0 at the box centre: index M/2 sits at x = 0
    amp = np.where(band, rng.uniform(0.5, 1.5, grid.shape), 0.0)
    shift = np.exp(-1j * (grid.kmesh[0] + grid.kmesh[1]) * grid.x[0])
    return ifft2(amp * shift)


def bilinear_probe(
    grid: Grid2D,
    N1: float,
    ratios=(2, 4, 8, 16),
    delta: float | None = None,
    trials: int = 8,
    n_times: int = 400,
    seed: int = 0,
) -> ProbeResult:
    """Space-time L^2 norm of a product of free Schroedinger waves at scales N1 <= N2.

    For each N2 = N1 * ratio the normalised quantity
    ||e^{it Delta} f1 . e^{it Delta} f2||_{L^2([0, delta] x T^2)} / (||f1|| ||f2||)
    is maximised over ``trials`` random data sets, and the exponent alpha of
    max ~ (N1/N2)^alpha is fitted in log-log space.
    """
    ratios = [float(r) for r in ratios]
    if len(ratios) < 4:
        raise ValueError("the bilinear fit needs at least 4 ladder points")
    if any(r < 1 for r in ratios):
        raise ValueError("need N1 <= N2 at every ladder point")
    top = 2.0 * N1 * max(ratios)
    if top > grid.kmax / 1.5:
        raise ValueError(f"scale 2 N2 = {top} is not representable below 2/3 of kmax = {grid.kmax:.4g}")
    if delta is None:
        delta = 0.4 / (N1 * N1)
    rng = np.random.default_rng(seed)
    times = np.linspace(0.0, delta, n_times)
    wt = np.full(n_times, delta / (n_times - 1))
    wt[[0, -1]] *= 0.5
    samples = []
    best = []
    for r in ratios:
        N2 = N1 * r
        worst = 0.0
        for _ in range(trials):
            f1 = _band_data(grid, N1, 2 * N1, rng)
            f2 = _band_data(grid, N2, 2 * N2, rng)
            h1, h2 = fft2(f1), fft2(f2)
            norm = math.sqrt(grid.cell_area * np.sum(np.abs(f1) ** 2) * grid.cell_area * np.sum(np.abs(f2) ** 2))
            acc = 0.0
            for t, w in zip(times, wt):
                ph = np.exp(-1j * t * grid.k2)
                prod = ifft2(ph * h1) * ifft2(ph * h2)
                acc += w * grid.cell_area * float(np.sum(np.abs(prod) ** 2))
            worst = max(worst, math.sqrt(acc) / norm)
        best.append(worst)
        samples.append((N2, worst, math.sqrt(N1 / N2)))
    alpha, r2 = loglog_fit([N1 / (N1 * r) for r in ratios], best)
    return ProbeResult("bilinear", samples, alpha, r2, {"N1": N1, "delta": delta, "trials": trials, "seed": seed})


STRICHARTZ_KINDS = ("schrodinger_radial", "wave")


def check_strichartz_pair(kind: str, q: float, r: float) -> None:
    if kind == "schrodinger_radial":
        ok = q >= 2 and r >= 2 and math.isclose(2.0 / q, 1.0 - 2.0 / r, abs_tol=1e-12)
        if not ok:
            raise ValueError(f"(q, r) = ({q}, {r}) violates 2/q = 1 - 2/r with q >= 2")
    elif kind == "wave":
        ok = q > 2 and r >= 2 and math.isclose(1.0 / q, 1.0 - 2.0 / r, abs_tol=1e-12)
        if not ok:
            raise ValueError(f"(q, r) = ({q}, {r}) violates 1/q = 1 - 2/r with q > 2")
    else:
        raise ValueError(f"unknown Strichartz kind {kind!r}; expected one of {STRICHARTZ_KINDS}")


def _radial_data(grid: Grid2D, rng: np.random.Generator, dilation: float, n_bumps: int = 3) -> tuple[np.ndarray, list]:
    """Sum of radial Gaussians lam * g(lam x) with random widths and complex weights."""
    widths = rng.uniform(0.5, 1.0, n_bumps)
    weights = rng.normal(size=n_bumps) + 1j * rng.normal(size=n_bumps)
    r2 = grid.radius**2 * dilation**2
    f = sum(c * np.exp(-r2 / (2 * w * w)) for c, w in zip(weights, widths))
    return dilation * f, list(zip(widths, weights))


def _space_time_norm(grid: Grid2D, fh: np.ndarray, phase_symbol: np.ndarray, T: float, q: float, r: float, n_times: int) -> float:
    times = np.linspace(0.0, T, n_times)
    vals = np.empty(n_times)
    for i, t in enumerate(times):
        a = np.abs(ifft2(np.exp(-1j * t * phase_symbol) * fh))
        if math.isinf(r):
            vals[i] = a.max()
        else:
            vals[i] = (grid.cell_area * np.sum(a**r)) ** (1.0 / r)
    if math.isinf(q):
        return float(vals.max())
    w = np.full(n_times, T / (n_times - 1))
    w[[0, -1]] *= 0.5
    return float(np.sum(w * vals**q) ** (1.0 / q))


def strichartz_probe(
    kind: str,
    q: float,
    r: float,
    trials: int = 4,
    grid: Grid2D | None = None,
    T: float = 0.25,
    dilation: float = 2.0,
    n_times: int = 129,
    seed: int = 0,
) -> ProbeResult:
    """L^q_t L^r_x norm of free evolutions over [0, T] divided by the data L^2 norm.

    Each trial also measures the ratio for the same data dilated by
    ``dilation`` (L^2-preserving), over the correspondingly rescaled window
    (T / dilation^2 for Schroedinger, T / dilation for the half-wave flow).
    ``extra["max_dilation_defect"]`` is the largest relative change of the
    ratio; the fitted exponent is the log-log slope of ratio against the
    dilation factor, zero for an exactly scale-invariant estimate.
    """
    check_strichartz_pair(kind, q, r)
    grid = grid or Grid2D(256, 16.0)
    if kind == "schrodinger_radial":
        symbol, power = grid.k2, 2
    else:
        symbol, power = grid.kabs, 1
    rng = np.random.default_rng(seed)
    samples = []
    defects = []
    for _ in range(trials):
        state = rng.bit_generator.state
        pair = []
        for lam in (1.0, dilation):
            rng.bit_generator.state = state
            f, _ = _radial_data(grid, rng, lam)
            l2 = math.sqrt(grid.cell_area * np.sum(np.abs(f) ** 2))
            lhs = _space_time_norm(grid, fft2(f), symbol, T / lam**power, q, r, n_times)
            pair.append(lhs / l2)
            samples.append((lam, lhs / l2, 1.0))
        defects.append(abs(pair[1] - pair[0]) / pair[0])
    lam_col = [s[0] for s in samples]
    ratio_col = [s[1] for s in samples]
    slope, r2 = loglog_fit(lam_col, ratio_col)
    extra = {"kind": kind, "q": q, "r": r, "T": T, "dilation": dilation, "max_dilation_defect": max(defects), "seed": seed}
    eid = "strichartz_schrodinger" if kind == "schrodinger_radial" else "strichartz_wave"
    return ProbeResult(eid, samples, slope, r2, extra)


# --------------------------------------------------------------------------
# drift regression


ROUNDOFF_FLOOR = 1e-13


@dataclass(frozen=True)
class DriftResult:
    N_ladder: tuple
    drifts: tuple
    slope: float
    fit_r2: float
    inconclusive: bool
    energy_scale: float
    window: float
    dt: float

    def to_text(self) -> str:
        lines = [
            f"slope {float(self.slope)!r}",
            f"fit_r2 {float(self.fit_r2)!r}",
            f"inconclusive {int(self.inconclusive)}",
            f"energy_scale {float(self.energy_scale)!r}",
            f"window {float(self.window)!r}",
            f"dt {float(self.dt)!r}",
            "N drift",
        ]
        lines += [f"{float(N)!r} {float(d)!r}" for N, d in zip(self.N_ladder, self.drifts)]
        return "\n".join(lines) + "\n"


def drift_slope_experiment(
    state: ZakharovState,
    N_ladder,
    s: float,
    dt: float,
    window: float,
    step=None,
) -> DriftResult:
    """Fit log |modified_H(window) - modified_H(0)| against log N.

    The flow itself does not depend on N, so one trajectory is integrated
    with a fixed step and the modified energy is evaluated on its endpoints
    for every N of the ladder.
    """
    step = step or strang_step
    N_ladder = tuple(float(N) for N in N_ladder)
    if len(N_ladder) < 2:
        raise ValueError("need at least two ladder points")
    g = state.grid
    if max(N_ladder) > g.n_max:
        raise ValueError(f"ladder point {max(N_ladder)} exceeds the grid's N_max = {g.n_max:.4g}")
    if not dt > 0 or not window > 0:
        raise ValueError("dt and window must be positive")
    n_steps = max(1, int(round(window / dt)))
    H0 = [modified_energy(state, N, s) for N in N_ladder]
    end = state
    for _ in range(n_steps):
        end = step(end, dt)
    H1 = [modified_energy(end, N, s) for N in N_ladder]
    drifts = tuple(abs(a - b) for a, b in zip(H1, H0))
    u, n, nu = state.arrays()
    scale = max(abs(h) for h in H0) + float(g.cell_area * np.sum(np.abs(u) ** 2 + 0.5 * (n * n + nu * nu)))
    inconclusive = drifts[-1] < ROUNDOFF_FLOOR * scale or min(drifts) == 0.0
    if min(drifts) > 0:
        slope, r2 = loglog_fit(N_ladder, drifts)
    else:
        slope, r2 = float("nan"), float("nan")
    return DriftResult(N_ladder, drifts, slope, r2, bool(inconclusive), scale, n_steps * dt, dt)


def power_law_state(grid: Grid2D, decay: float, seed: int, band_limit: float | None = None) -> ZakharovState:
    """Random dealiased state with spectra ~ <xi>^-decay and nu mean-zero.

    Each field is drawn as a unit-L^2 complex field; u keeps it, n and nu take
    its real part, so their norms are close to 1/sqrt(2) rather than exactly 1.

    ``band_limit`` additionally zeroes every mode with |xi| > band_limit.
    """
    rng = np.random.default_rng(seed)
    keep = grid.dealias_mask.copy()
    if band_limit is not None:
        keep &= grid.kabs <= band_limit

    def draw():
        h = (rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)) * grid.bracket ** (-decay)
        f = ifft2(np.where(keep, h, 0.0))
        return f / math.sqrt(grid.cell_area * np.sum(np.abs(f) ** 2))

    u = draw()
    n = draw().real
    nu = draw().real
    nu = nu - nu.mean()
    return ZakharovState.from_arrays(grid, 0.0, u, n, nu)
