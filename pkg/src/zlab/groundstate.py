"""Townes profile Q: the positive radial solution of  Q'' + Q'/r - Q + Q^3 = 0."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp, trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.special import k0e, k1e

from .spectral import Field2D, Grid2D, boundary_ratio

R_START = 1e-4


class ShootingError(RuntimeError):
    pass


@dataclass(frozen=True)
class RadialProfile:
    r_nodes: np.ndarray
    values: np.ndarray
    r_max: float
    mass: float
    grad_sq: float
    l4_fourth: float

    @property
    def q0(self) -> float:
        return float(self.values[0])

    def pohozaev_residuals(self) -> tuple[float, float]:
        """Relative defects of ||grad Q||^2 = ||Q||^2 and ||Q||_4^4 = 2 ||Q||^2."""
        return (
            abs(self.grad_sq - self.mass) / self.mass,
            abs(self.l4_fourth - 2.0 * self.mass) / (2.0 * self.mass),
        )

    def __post_init__(self):
        object.__setattr__(self, "_interp", PchipInterpolator(self.r_nodes, self.values))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.r_max, self._interp(np.minimum(r, self.r_max)), 0.0)


def _rhs(r, y):
    q, dq = y[0], y[1]
    return [dq, -dq / r + q - q**3, q * q * r, dq * dq * r, q**4 * r]


def _series_start(q0: float, r0: float) -> list[float]:
    c = 0.25 * (q0 - q0**3)
    return [q0 + c * r0**2, 2.0 * c * r0, 0.5 * q0**2 * r0**2, 0.0, 0.5 * q0**4 * r0**2]


def _crossing(r, y):
    return y[0]


_crossing.terminal = True


def _turning(r, y):
    return y[1]


_turning.terminal = True
_turning.direction = 1


def _shoot(q0: float, r_max: float, rtol: float, dense: bool = False):
    return solve_ivp(
        _rhs,
        (R_START, r_max),
        _series_start(q0, R_START),
        method="DOP853",
        rtol=rtol,
        atol=rtol * 1e-6,
        events=(_crossing, _turning),
        dense_output=dense,
    )


def _overshoots(sol) -> bool | None:
    if sol.t_events[0].size:
        return True
    if sol.t_events[1].size:
        return False
    return None


def solve_townes(tolerance: float = 1e-12, r_max: float = 20.0, n_nodes: int = 8001) -> RadialProfile:
    """Shoot on Q(0) and bisect between sign-crossing and turning-up branches.

    The shooting trajectory is only trusted while it decays; past the point
    where the growing mode takes over, Q is continued by the decaying solution
    K0(r) of the linearised equation.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    lo, hi = 1.0, 3.0
    if _overshoots(_shoot(lo, r_max, tolerance)) is not False or _overshoots(_shoot(hi, r_max, tolerance)) is not True:
        raise ShootingError(f"could not bracket Q(0) in [{lo}, {hi}] with r_max={r_max}")
    while hi - lo > 4e-16 * hi:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        side = _overshoots(_shoot(mid, r_max, tolerance))
        if side is None:
            lo = hi = mid
            break
        if side:
            hi = mid
        else:
            lo = mid
    q0 = 0.5 * (lo + hi)

    sol = _shoot(q0, r_max, tolerance, dense=True)
    # last trustworthy radius: the minimum of |Q| before blow-up or crossing
    r_end = sol.t[-1]
    probe = np.linspace(R_START, r_end, 20001)
    q_probe = sol.sol(probe)[0]
    stop = int(np.argmin(np.abs(q_probe)))
    if sol.status == 1 or stop < len(probe) - 1:
        # back off so the growing-mode contamination is negligible
        r_match = probe[stop] - 3.0
    else:
        r_match = r_end
    r_match = max(r_match, 5.0)
    y_match = sol.sol(r_match)

    r_nodes = np.linspace(0.0, r_max, n_nodes)
    inner = r_nodes <= r_match
    values = np.empty_like(r_nodes)
    rin = np.maximum(r_nodes[inner], R_START)
    values[inner] = sol.sol(rin)[0]
    values[0] = q0
    # K0 tail with k0e(r) = exp(r) K0(r)
    outer = ~inner
    ro = r_nodes[outer]
    values[outer] = y_match[0] * k0e(ro) / k0e(r_match) * np.exp(-(ro - r_match))

    mass_in, grad_in, l4_in = y_match[2], y_match[3], y_match[4]
    tail = _tail_integrals(y_match[0], r_match, r_max)
    two_pi = 2.0 * np.pi
    return RadialProfile(
        r_nodes=r_nodes,
        values=values,
        r_max=float(r_max),
        mass=float(two_pi * (mass_in + tail[0])),
        grad_sq=float(two_pi * (grad_in + tail[1])),
        l4_fourth=float(two_pi * (l4_in + tail[2])),
    )


def _tail_integrals(q_match: float, r_match: float, r_max: float):
    r = np.linspace(r_match, r_max, 4001)
    scale = q_match / k0e(r_match)
    q = scale * k0e(r) * np.exp(-(r - r_match))
    dq = -scale * k1e(r) * np.exp(-(r - r_match))
    return tuple(trapezoid(v * r, r) for v in (q * q, dq * dq, q**4))


def mass_threshold(profile: RadialProfile) -> float:
    return float(np.sqrt(profile.mass))


def equation_residual(profile: RadialProfile, r_lo: float = 0.05, r_hi: float | None = None) -> float:
    """Max |Q'' + Q'/r - Q + Q^3| by fourth-order centred differences on the node table."""
    r = profile.r_nodes
    q = profile.values
    dr = r[1] - r[0]
    d1 = (-q[4:] + 8 * q[3:-1] - 8 * q[1:-3] + q[:-4]) / (12 * dr)
    d2 = (-q[4:] + 16 * q[3:-1] - 30 * q[2:-2] + 16 * q[1:-3] - q[:-4]) / (12 * dr**2)
    rc = r[2:-2]
    qc = q[2:-2]
    res = d2 + d1 / rc - qc + qc**3
    sel = (rc >= r_lo) & (rc <= (r_hi if r_hi is not None else profile.r_max))
    return float(np.abs(res[sel]).max())


def project_to_grid(profile: RadialProfile, grid: Grid2D, scale: float = 1.0, amplitude: float = 1.0):
    """Sample ``amplitude * mu Q(mu |x|)`` on the grid.

    Returns ``(field, diagnostics)``; diagnostics carries warnings about an
    under-resolved scale or a profile that does not decay inside the box.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    values = amplitude * scale * profile(scale * grid.radius)
    diag = {"under_resolved": False, "boundary_ratio": boundary_ratio(values)}
    # Q varies on unit length; require a few points per core width
    if scale * grid.h > 0.25:
        diag["under_resolved"] = True
        warnings.warn(f"Q at scale {scale} is under-resolved by spacing {grid.h}", stacklevel=2)
    return Field2D(grid, values.astype(complex), name="Q"), diag


def gn_ratio(u: Field2D, q_mass: float) -> float:
    """(1/2 ||u||_4^4 ||Q||_2^2) / (||u||_2^2 ||grad u||_2^2); at most 1 by sharp Gagliardo-Nirenberg."""
    a = u.physical()
    w = u.grid.cell_area
    l2 = w * np.sum(np.abs(a) ** 2)
    if l2 == 0:
        raise ValueError("sharp Gagliardo-Nirenberg ratio requires a nonzero field")
    l4 = w * np.sum(np.abs(a) ** 4)
    grad = u.grid.spectral_sq_weight() * np.sum(u.grid.k2 * np.abs(u.spectral()) ** 2)
    return float(0.5 * l4 * q_mass / (l2 * grad))


def write_profile(path, profile: RadialProfile) -> None:
    header = (
        f"mass {float(profile.mass)!r}\n"
        f"grad_sq {float(profile.grad_sq)!r}\n"
        f"l4_fourth {float(profile.l4_fourth)!r}\n"
        f"r_max {float(profile.r_max)!r}\n"
        "r Q(r)"
    )
    np.savetxt(path, np.column_stack([profile.r_nodes, profile.values]), fmt="%.17g", header=header)


def read_profile(path) -> RadialProfile:
    meta = {}
    for line in Path(path).read_text().splitlines():
        if not line.startswith("#"):
            break
        parts = line[1:].split()
        if len(parts) == 2:
            try:
                meta[parts[0]] = float(parts[1])
            except ValueError:
                pass
    table = np.loadtxt(path)
    return RadialProfile(
        r_nodes=table[:, 0],
        values=table[:, 1],
        r_max=meta["r_max"],
        mass=meta["mass"],
        grad_sq=meta["grad_sq"],
        l4_fourth=meta["l4_fourth"],
    )
