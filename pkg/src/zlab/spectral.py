"""Periodic grid, Fourier multipliers and norms on the 2D torus.

Fields live on the square torus ``[-L/2, L/2)^2`` sampled at ``M x M`` points.
The spectral representation is the unnormalised ``fft2`` of the samples, so

    integral |f|^2 dx  ~  h^2 sum |f_j|^2  =  (h^2 / M^2) sum |F_k|^2 .

All integrals are grid-cell quadratures with weight ``h^2``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

PHYSICAL = "physical"
SPECTRAL = "spectral"


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic grid with ``M`` points per side on a box of length ``L``."""

    M: int
    L: float

    def __post_init__(self):
        if int(self.M) != self.M or self.M <= 0 or self.M % 2:
            raise ValueError(f"points_per_side must be an even positive integer, got {self.M}")
        if not self.L > 0:
            raise ValueError(f"domain_length must be positive, got {self.L}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return self.L / self.M

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def shape(self) -> tuple[int, int]:
        return (self.M, self.M)

    @cached_property
    def x(self) -> np.ndarray:
        return -0.5 * self.L + self.h * np.arange(self.M)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        # axis 0 is x, axis 1 is y
        return np.meshgrid(self.x, self.x, indexing="ij")

    @cached_property
    def radius(self) -> np.ndarray:
        X, Y = self.mesh
        return np.hypot(X, Y)

    @cached_property
    def index(self) -> np.ndarray:
        """Integer wavenumber indices in fft order, covering ``[-M/2, M/2)``."""
        return np.fft.fftfreq(self.M, d=1.0 / self.M).astype(int)

    @cached_property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * self.index / self.L

    @cached_property
    def kmesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.k, self.k, indexing="ij")

    @cached_property
    def k2(self) -> np.ndarray:
        KX, KY = self.kmesh
        return KX**2 + KY**2

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def bracket(self) -> np.ndarray:
        """Japanese bracket <xi> = (1 + |xi|^2)^(1/2)."""
        return np.sqrt(1.0 + self.k2)

    @property
    def kmax(self) -> float:
        return np.pi / self.h

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with max(|jx|, |jy|) <= M/3."""
        j = np.abs(self.index)
        keep = j <= self.M // 3
        return np.logical_and.outer(keep, keep)

    @property
    def n_max(self) -> float:
        """Largest I-method cutoff whose ``|xi| >= 3N`` branch is still on the grid."""
        return self.kmax / 3.0

    def spectral_sq_weight(self) -> float:
        return self.cell_area / self.M**2


def fft2(a: np.ndarray) -> np.ndarray:
    return sfft.fft2(a)


def ifft2(a: np.ndarray) -> np.ndarray:
    return sfft.ifft2(a)


@dataclass(frozen=True)
class Field2D:
    """Complex samples on a grid, tagged with their representation."""

    grid: Grid2D
    data: np.ndarray
    space: str = PHYSICAL
    name: str = ""

    def __post_init__(self):
        if self.space not in (PHYSICAL, SPECTRAL):
            raise ValueError(f"unknown representation {self.space!r}")
        if self.data.shape != self.grid.shape:
            raise ValueError(f"samples of shape {self.data.shape} do not match grid {self.grid.shape}")

    @classmethod
    def from_function(cls, grid: Grid2D, fn, name: str = "") -> "Field2D":
        X, Y = grid.mesh
        return cls(grid, np.asarray(fn(X, Y), dtype=complex), PHYSICAL, name)

    def physical(self) -> np.ndarray:
        return self.data if self.space == PHYSICAL else ifft2(self.data)

    def spectral(self) -> np.ndarray:
        return self.data if self.space == SPECTRAL else fft2(self.data)

    def as_physical(self) -> "Field2D":
        return self if self.space == PHYSICAL else to_physical(self)

    def as_spectral(self) -> "Field2D":
        return self if self.space == SPECTRAL else to_spectral(self)

    def with_data(self, data: np.ndarray, space: str | None = None) -> "Field2D":
        return Field2D(self.grid, data, space or self.space, self.name)


def to_spectral(f: Field2D) -> Field2D:
    if f.space != PHYSICAL:
        raise ValueError("to_spectral expects a field in physical representation")
    return Field2D(f.grid, fft2(f.data), SPECTRAL, f.name)


def to_physical(f: Field2D) -> Field2D:
    if f.space != SPECTRAL:
        raise ValueError("to_physical expects a field in spectral representation")
    return Field2D(f.grid, ifft2(f.data), PHYSICAL, f.name)


# --------------------------------------------------------------------------
# multipliers


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def imethod_symbol(xi_mag, N: float, s: float):
    """Smoothing symbol m_N: 1 below N, (|xi|/N)^(s-1) above 3N.

    On ``N < |xi| < 3N`` the exponent (s-1) is switched on with a cubic
    smoothstep in ``(rho-1)/2``, which keeps the symbol C^1 and monotone.
    """
    if not 0.0 < s < 1.0:
        raise ValueError(f"I-method regularity s must lie in (0, 1), got {s}")
    if not N > 0:
        raise ValueError(f"I-method cutoff N must be positive, got {N}")
    rho = np.asarray(xi_mag, dtype=float) / N
    with np.errstate(divide="ignore"):
        log_rho = np.where(rho > 1.0, np.log(np.maximum(rho, 1.0)), 0.0)
    out = np.exp((s - 1.0) * smoothstep((rho - 1.0) / 2.0) * log_rho)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class MultiplierSpec:
    kind: str
    params: tuple = field(default=())

    KINDS = ("Lambda", "InvLambda", "BesselPow", "Laplacian", "GradientComponent", "IMethod", "Dyadic")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown multiplier kind {self.kind!r}")
        if self.kind == "IMethod":
            N, s = self.params
            imethod_symbol(1.0, N, s)
        if self.kind == "GradientComponent" and self.params[0] not in (0, 1):
            raise ValueError("gradient axis must be 0 or 1")

    @classmethod
    def lam(cls):
        return cls("Lambda")

    @classmethod
    def inv_lam(cls):
        return cls("InvLambda")

    @classmethod
    def bessel(cls, sigma: float):
        return cls("BesselPow", (float(sigma),))

    @classmethod
    def laplacian(cls):
        return cls("Laplacian")

    @classmethod
    def gradient(cls, axis: int):
        return cls("GradientComponent", (int(axis),))

    @classmethod
    def imethod(cls, N: float, s: float):
        return cls("IMethod", (float(N), float(s)))

    @classmethod
    def dyadic(cls, j: int):
        return cls("Dyadic", (int(j),))


def dyadic_mask(grid: Grid2D, j: int) -> np.ndarray:
    """Sharp annulus <xi> in [2^j, 2^(j+1)); j = 0 collects <xi> < 2."""
    b = grid.bracket
    lo = 0.0 if j == 0 else 2.0**j
    return (b >= lo) & (b < 2.0 ** (j + 1))


def dyadic_count(grid: Grid2D) -> int:
    """Number of dyadic blocks needed to cover every grid mode."""
    return int(np.floor(np.log2(grid.bracket.max()))) + 1


def symbol(spec: MultiplierSpec, grid: Grid2D) -> np.ndarray:
    kind = spec.kind
    if kind == "Lambda":
        return grid.kabs
    if kind == "InvLambda":
        out = np.zeros_like(grid.kabs)
        nz = grid.kabs > 0
        out[nz] = 1.0 / grid.kabs[nz]
        return out
    if kind == "BesselPow":
        return grid.bracket ** spec.params[0]
    if kind == "Laplacian":
        return -grid.k2
    if kind == "GradientComponent":
        return 1j * grid.kmesh[spec.params[0]]
    if kind == "IMethod":
        N, s = spec.params
        return imethod_symbol(grid.kabs, N, s)
    if kind == "Dyadic":
        return dyadic_mask(grid, spec.params[0]).astype(float)
    raise AssertionError(kind)


ZERO_MODE_TOL = 1e-12


def apply_multiplier(f: Field2D, spec: MultiplierSpec, zero_mode: str = "error") -> Field2D:
    """Multiply the spectrum of ``f`` by the symbol of ``spec``.

    The result is returned in the representation ``f`` came in. For
    ``InvLambda`` a non-negligible mean raises unless ``zero_mode="drop"``.
    """
    fh = f.spectral()
    if spec.kind == "InvLambda" and zero_mode != "drop":
        if zero_mode != "error":
            raise ValueError(f"unknown zero-mode policy {zero_mode!r}")
        total = np.sqrt(np.sum(np.abs(fh) ** 2))
        dc = abs(fh[0, 0])
        if dc > ZERO_MODE_TOL * total:
            mass = f.grid.spectral_sq_weight() * dc**2
            raise ValueError(
                f"inverse Lambda undefined on the zero mode: field carries zero-mode "
                f"L2 mass {mass:.3e}; pass zero_mode='drop' to discard it"
            )
    out = fh * symbol(spec, f.grid)
    res = Field2D(f.grid, out, SPECTRAL, f.name)
    return res if f.space == SPECTRAL else to_physical(res)


def dealias(fh: np.ndarray, grid: Grid2D) -> np.ndarray:
    return np.where(grid.dealias_mask, fh, 0.0)


# --------------------------------------------------------------------------
# norms


def sobolev_norm(f: Field2D, sigma: float) -> float:
    fh = f.spectral()
    w = f.grid.bracket ** (2.0 * sigma) if sigma else 1.0
    return float(np.sqrt(f.grid.spectral_sq_weight() * np.sum(w * np.abs(fh) ** 2)))


def lp_norm(f: Field2D, p: float) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(f.physical())
    if np.isinf(p):
        return float(a.max())
    return float((f.grid.cell_area * np.sum(a**p)) ** (1.0 / p))


def periodic_distance(grid: Grid2D, center=(0.0, 0.0)) -> np.ndarray:
    X, Y = grid.mesh
    L = grid.L
    dx = (X - center[0] + 0.5 * L) % L - 0.5 * L
    dy = (Y - center[1] + 0.5 * L) % L - 0.5 * L
    return np.hypot(dx, dy)


def ball_mass(f: Field2D, p: float, R: float, center=(0.0, 0.0)) -> float:
    """Quadrature of |f|^p over the ball |x - center| <= R (cell centres, periodic metric)."""
    if R > 0.5 * f.grid.L:
        raise ValueError(f"ball radius {R} exceeds L/2 = {0.5 * f.grid.L}; the ball would wrap the torus")
    inside = periodic_distance(f.grid, center) <= R
    return float(f.grid.cell_area * np.sum(np.abs(f.physical()[inside]) ** p))


def d4_images(a: np.ndarray) -> list[np.ndarray]:
    """The eight images of a grid array under rotations/reflections fixing x = 0.

    The origin sits at index M/2, so the reflection x -> -x is j -> (M - j) mod M.
    """
    flip = np.roll(a[::-1, :], 1, axis=0)
    out = []
    for b in (a, flip):
        r = b
        for _ in range(4):
            out.append(r)
            # rotate by 90 degrees about index (M/2, M/2): (i, j) -> (j, -i)
            r = np.roll(np.rot90(r), 1, axis=0)
    return out


def radial_defect(f: Field2D) -> float:
    a = f.physical()
    norm = np.sqrt(np.sum(np.abs(a) ** 2))
    if norm == 0:
        return 0.0
    avg = sum(d4_images(a)) / 8.0
    return float(np.sqrt(np.sum(np.abs(a - avg) ** 2)) / norm)


def boundary_ratio(a: np.ndarray) -> float:
    """max |a| on the outer ring of the box divided by max |a|."""
    m = np.abs(a).max()
    if m == 0:
        return 0.0
    ring = np.concatenate([a[0, :], a[-1, :], a[:, 0], a[:, -1]])
    return float(np.abs(ring).max() / m)


# --------------------------------------------------------------------------
# snapshot files

_MAGIC = b"ZFLD"


def write_field(path, f: Field2D) -> None:
    """Binary snapshot: header then row-major complex64 (re, im) pairs."""
    name = f.name.encode()
    flag = 0 if f.space == PHYSICAL else 1
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<idBH", f.grid.M, f.grid.L, flag, len(name)))
        fh.write(name)
        fh.write(np.ascontiguousarray(f.data, dtype="<c8").tobytes())


def read_field(path) -> Field2D:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError(f"{path}: not a field snapshot")
    off = 4
    M, L, flag, nlen = struct.unpack_from("<idBH", raw, off)
    off += struct.calcsize("<idBH")
    name = raw[off : off + nlen].decode()
    off += nlen
    data = np.frombuffer(raw, dtype="<c8", offset=off, count=M * M).reshape(M, M)
    return Field2D(Grid2D(M, L), data.astype(complex), SPECTRAL if flag else PHYSICAL, name)


def write_field_text(path, f: Field2D) -> None:
    """Lossless text snapshot: header lines then one ``re im`` pair per line."""
    lines = [f"# M {f.grid.M}", f"# L {f.grid.L!r}", f"# space {f.space}", f"# name {f.name}"]
    lines += [f"{float(z.real)!r} {float(z.imag)!r}" for z in f.data.ravel()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_text(path) -> Field2D:
    header = {}
    values = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(" ")
            header[key] = val
        elif line.strip():
            re_, im_ = line.split()
            values.append(complex(float(re_), float(im_)))
    grid = Grid2D(int(header["M"]), float(header["L"]))
    data = np.array(values, dtype=complex).reshape(grid.shape)
    return Field2D(grid, data, header["space"], header.get("name", ""))
