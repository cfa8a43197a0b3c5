"""Zakharov state (t, u, n, nu) with nu = Lambda^{-1} dn/dt."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Field2D, Grid2D, PHYSICAL

REALITY_TOL = 1e-10


@dataclass(frozen=True)
class ZakharovState:
    t: float
    u: Field2D
    n: Field2D
    nu: Field2D

    @property
    def grid(self) -> Grid2D:
        return self.u.grid

    @classmethod
    def from_arrays(cls, grid: Grid2D, t: float, u, n, nu) -> "ZakharovState":
        return cls(
            float(t),
            Field2D(grid, np.asarray(u, dtype=complex), PHYSICAL, "u"),
            Field2D(grid, np.asarray(n, dtype=complex), PHYSICAL, "n"),
            Field2D(grid, np.asarray(nu, dtype=complex), PHYSICAL, "nu"),
        )

    @classmethod
    def zeros(cls, grid: Grid2D, t: float = 0.0) -> "ZakharovState":
        z = np.zeros(grid.shape)
        return cls.from_arrays(grid, t, z, z, z)

    def arrays(self):
        """(u complex, n real, nu real) physical sample arrays."""
        return self.u.physical(), self.n.physical().real, self.nu.physical().real

    def n_plus(self) -> np.ndarray:
        _, n, nu = self.arrays()
        return n + 1j * nu


def check_real(a: np.ndarray, what: str) -> None:
    a = np.asarray(a)
    if np.iscomplexobj(a):
        scale = np.sqrt(np.sum(np.abs(a) ** 2))
        if np.sqrt(np.sum(a.imag**2)) > REALITY_TOL * max(scale, 1e-300):
            raise ValueError(f"{what} must be real-valued; imaginary part exceeds {REALITY_TOL:g} of its norm")


def split_components(n: Field2D, nu: Field2D) -> tuple[Field2D, Field2D]:
    """n_plus = n + i nu, n_minus = n - i nu."""
    a, b = n.physical(), nu.physical()
    check_real(a, "n")
    check_real(b, "nu")
    a, b = a.real, b.real
    g = n.grid
    return Field2D(g, a + 1j * b, PHYSICAL, "n_plus"), Field2D(g, a - 1j * b, PHYSICAL, "n_minus")


def recombine(n_plus: Field2D, n_minus: Field2D) -> tuple[Field2D, Field2D]:
    """Inverse of split_components: n = (n+ + n-)/2, nu = (n+ - n-)/(2i)."""
    p, m = n_plus.physical(), n_minus.physical()
    n = 0.5 * (p + m)
    nu = (p - m) / 2j
    check_real(n, "n")
    check_real(nu, "nu")
    g = n_plus.grid
    return Field2D(g, n.real.astype(complex), PHYSICAL, "n"), Field2D(g, nu.real.astype(complex), PHYSICAL, "nu")
