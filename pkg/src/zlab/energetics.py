"""Conserved and modified energies, commutator terms and the frequency schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .spectral import Grid2D, fft2, ifft2, imethod_symbol
from .state import ZakharovState


class ScheduleError(ValueError):
    pass


# --------------------------------------------------------------------------
# small spectral helpers on raw arrays


def _integral(grid: Grid2D, a) -> float:
    return float(grid.cell_area * np.sum(a).real)


def _grad_sq(grid: Grid2D, fh: np.ndarray) -> float:
    return float(grid.spectral_sq_weight() * np.sum(grid.k2 * np.abs(fh) ** 2))


def _hs_sq(grid: Grid2D, fh: np.ndarray, sigma: float) -> float:
    w = grid.bracket ** (2.0 * sigma)
    return float(grid.spectral_sq_weight() * np.sum(w * np.abs(fh) ** 2))


def _inv_lambda(grid: Grid2D, fh: np.ndarray) -> np.ndarray:
    out = np.zeros_like(fh)
    nz = grid.kabs > 0
    out[nz] = fh[nz] / grid.kabs[nz]
    return out


def velocity_from_nu(grid: Grid2D, nu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """v = grad w with Lambda w = nu, i.e. v = grad Lambda^{-1} nu (nu mean-zero)."""
    wh = _inv_lambda(grid, fft2(nu))
    KX, KY = grid.kmesh
    return ifft2(1j * KX * wh), ifft2(1j * KY * wh)


def i_symbol(grid: Grid2D, N: float, s: float) -> np.ndarray:
    return imethod_symbol(grid.kabs, N, s)


# --------------------------------------------------------------------------
# energy report


@dataclass(frozen=True)
class EnergyReport:
    t: float
    mass: float
    H_vform: float
    H_plusform: float
    modified_H: float
    E_Iu: float
    H1: float
    Iv_half: float
    identity_residual: float


def hamiltonian_vform(grid: Grid2D, u, n, v) -> float:
    """int |grad u|^2 + n|u|^2 + n^2/2 + |v|^2/2."""
    rho = np.abs(u) ** 2
    vsq = np.abs(v[0]) ** 2 + np.abs(v[1]) ** 2
    return _grad_sq(grid, fft2(u)) + _integral(grid, n * rho + 0.5 * n * n + 0.5 * vsq)


def hamiltonian_plusform(grid: Grid2D, u, n_plus) -> float:
    """||grad u||^2 + ||n+||^2/2 + (1/2) int (n+ + conj n+) |u|^2."""
    rho = np.abs(u) ** 2
    return (
        _grad_sq(grid, fft2(u))
        + 0.5 * _integral(grid, np.abs(n_plus) ** 2)
        + 0.5 * _integral(grid, (n_plus + np.conj(n_plus)) * rho)
    )


def modified_energy(state: ZakharovState, N: float, s: float) -> float:
    """Hamiltonian evaluated on (Iu, In+) with the density factor I(n+ + conj n+)."""
    g = state.grid
    m = i_symbol(g, N, s)
    u, n, nu = state.arrays()
    p = n + 1j * nu
    Iu = ifft2(m * fft2(u))
    Ip = ifft2(m * fft2(p))
    I_dens = ifft2(m * fft2(p + np.conj(p)))
    return (
        _grad_sq(g, fft2(Iu))
        + 0.5 * _integral(g, np.abs(Ip) ** 2)
        + 0.5 * _integral(g, I_dens * np.abs(Iu) ** 2)
    )


def energy_E(grid: Grid2D, u) -> float:
    """E(u) = ||grad u||^2 - ||u||_4^4 / 2."""
    return _grad_sq(grid, fft2(u)) - 0.5 * _integral(grid, np.abs(u) ** 4)


def energy_H1(grid: Grid2D, u, n) -> float:
    """||grad u||^2 + ||n||^2/2 + int n|u|^2."""
    return _grad_sq(grid, fft2(u)) + _integral(grid, 0.5 * n * n + n * np.abs(u) ** 2)


def h1_decomposition(grid: Grid2D, u, n) -> float:
    """E(u) + (1/2) int (n + |u|^2)^2, equal to energy_H1 by completing the square."""
    return energy_E(grid, u) + 0.5 * _integral(grid, (n + np.abs(u) ** 2) ** 2)


def energy_report(state: ZakharovState, N: float, s: float) -> EnergyReport:
    g = state.grid
    u, n, nu = state.arrays()
    p = n + 1j * nu
    v = velocity_from_nu(g, nu)
    H_v = hamiltonian_vform(g, u, n, v)
    H_p = hamiltonian_plusform(g, u, p)

    m = i_symbol(g, N, s)
    Iu = ifft2(m * fft2(u))
    In = ifft2(m * fft2(n)).real
    Iv = (ifft2(m * fft2(v[0])), ifft2(m * fft2(v[1])))
    mod_H = modified_energy(state, N, s)
    E = energy_E(g, Iu)
    H1 = energy_H1(g, Iu, In)
    Iv_half = 0.5 * _integral(g, np.abs(Iv[0]) ** 2 + np.abs(Iv[1]) ** 2)
    return EnergyReport(
        t=state.t,
        mass=_integral(g, np.abs(u) ** 2),
        H_vform=H_v,
        H_plusform=H_p,
        modified_H=mod_H,
        E_Iu=E,
        H1=H1,
        Iv_half=Iv_half,
        identity_residual=abs(mod_H - (H1 + Iv_half)),
    )


# --------------------------------------------------------------------------
# commutator terms of d/dt modified energy


def commutator_terms(state: ZakharovState, N: float, s: float, dealias: bool = True) -> tuple[float, float, float]:
    """The three integrals whose sum is d/dt of the modified energy along the flow.

    With U = Iu, P = In+, F = I((n+ + n-) u) and F0 = (In+ + In-) Iu:

        term_I   = -Im int conj(Delta U) (F - F0)
        term_II  = 1/2 Im int conj(F) (F - F0)
        term_III = Im int conj(P) Lambda (I|u|^2 - |U|^2)

    ``dealias`` must match the flow: the simulator truncates the density
    forcing |u|^2 to the 2/3 band before it enters the wave equation.
    """
    g = state.grid
    m = i_symbol(g, N, s)
    u, n, nu = state.arrays()
    p = n + 1j * nu
    uh = fft2(u)
    U = ifft2(m * uh)
    P = ifft2(m * fft2(p))
    F = ifft2(m * fft2(2.0 * n * u))
    F0 = (P + np.conj(P)) * U
    lapU = ifft2(-g.k2 * m * uh)
    rho_h = fft2(np.abs(u) ** 2)
    if dealias:
        rho_h = np.where(g.dealias_mask, rho_h, 0.0)
    lam_diff = ifft2(g.kabs * (m * rho_h - fft2(np.abs(U) ** 2)))

    w = g.cell_area
    t1 = -float(np.imag(w * np.sum(np.conj(lapU) * (F - F0))))
    t2 = 0.5 * float(np.imag(w * np.sum(np.conj(F) * (F - F0))))
    t3 = float(np.imag(w * np.sum(np.conj(P) * lam_diff)))
    return t1, t2, t3


# --------------------------------------------------------------------------
# schedule arithmetic


def _denominator(s, eps):
    return 7 * s - 6 - (35 - 34 * s) * eps


def schedule_exponent(s, eps):
    """(10 + 34 eps) / (7 s - 6 - (35 - 34 s) eps)."""
    den = _denominator(s, eps)
    if den <= 0:
        raise ScheduleError(f"7s - 6 - (35 - 34s) eps = {float(den):.6g} must be positive")
    return (10 + 34 * eps) / den


def ps_exponent(s, eps):
    """Growth exponent p(s) = 2 (1 - s) (10 + 34 eps) / (7 s - 6 - (35 - 34 s) eps).

    Fraction inputs give an exact Fraction.
    """
    return 2 * (1 - s) * schedule_exponent(s, eps)


@dataclass(frozen=True)
class EpsilonRange:
    valid_strict: bool
    valid_loose: bool
    denominator_positive: bool
    bound_strict: float
    bound_loose: float

    @property
    def admissible(self) -> bool:
        return self.valid_strict and self.denominator_positive


def epsilon_range_valid(s, eps) -> EpsilonRange:
    """Evaluate the strict bound (17s-16)/(69-68s) and the looser (17-16s)/(69-68s).

    Only the strict bound, together with a positive schedule denominator,
    makes eps admissible.
    """
    b_strict = (17 * s - 16) / (69 - 68 * s)
    b_loose = (17 - 16 * s) / (69 - 68 * s)
    return EpsilonRange(
        valid_strict=bool(0 < eps < b_strict),
        valid_loose=bool(0 < eps < b_loose),
        denominator_positive=bool(_denominator(s, eps) > 0),
        bound_strict=float(b_strict),
        bound_loose=float(b_loose),
    )


def check_schedule_params(s, eps) -> None:
    if not Fraction(16, 17) < s < 1:
        raise ScheduleError(f"frequency schedule needs s > 16/17 (and s < 1), got s={float(s)}")
    r = epsilon_range_valid(s, eps)
    if not r.admissible:
        raise ScheduleError(
            f"eps={float(eps)} outside 0 < eps < (17s-16)/(69-68s) = {r.bound_strict:.6g} for s={float(s)}"
        )


@dataclass
class ISchedule:
    """N(Lambda) = clamp((Lambda / lambda_ref)^exponent, N_min, N_max) with hysteresis.

    ``fixed_N`` bypasses the law (and its parameter checks) entirely.
    """

    s: float
    eps: float
    N_min: float
    N_max: float
    lambda_ref: float = 1.0
    fixed_N: float | None = None
    current_N: float = field(default=0.0)

    def __post_init__(self):
        if self.fixed_N is not None:
            if not self.fixed_N > 0:
                raise ScheduleError("fixed N must be positive")
            self.current_N = float(self.fixed_N)
            return
        check_schedule_params(self.s, self.eps)
        if not 0 < self.N_min <= self.N_max:
            raise ScheduleError(f"need 0 < N_min <= N_max, got {self.N_min}, {self.N_max}")
        self.current_N = max(self.current_N, float(self.N_min))

    @property
    def exponent(self) -> float:
        return float(schedule_exponent(self.s, self.eps))

    def target(self, lam: float) -> float:
        if self.fixed_N is not None:
            return float(self.fixed_N)
        ratio = max(lam, 0.0) / self.lambda_ref
        with np.errstate(over="ignore"):
            raw = ratio**self.exponent if ratio > 0 else 0.0
        return float(min(max(raw, self.N_min), self.N_max))

    def update(self, lam_running_max: float) -> float:
        self.current_N = max(self.current_N, self.target(lam_running_max))
        return self.current_N


def n_schedule(lam_running_max: float, sched: ISchedule) -> float:
    return sched.update(lam_running_max)
