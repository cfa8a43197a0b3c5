import numpy as np
import pytest

from zlab.groundstate import solve_townes
from zlab.spectral import Grid2D, fft2, ifft2
from zlab.state import ZakharovState

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture(scope="session")
def profile():
    return solve_townes()


def random_band_limited(grid: Grid2D, rng, kcut: float, real: bool = False) -> np.ndarray:
    """Smooth random field with modes |xi| <= kcut, unit L^2 norm."""
    h = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    h = np.where(grid.kabs <= kcut, h * np.exp(-0.5 * (grid.kabs / max(kcut, 1e-12)) ** 2), 0.0)
    f = ifft2(h)
    if real:
        f = f.real
    return f / np.sqrt(grid.cell_area * np.sum(np.abs(f) ** 2))


def random_state(grid: Grid2D, rng, kcut: float | None = None, amp=(1.0, 0.5, 0.5)) -> ZakharovState:
    """Random admissible state: dealiased, real n and nu, nu mean-zero."""
    kcut = grid.n_max if kcut is None else kcut
    u = amp[0] * random_band_limited(grid, rng, kcut)
    n = amp[1] * random_band_limited(grid, rng, kcut, real=True)
    nu = amp[2] * random_band_limited(grid, rng, kcut, real=True)
    nu = nu - nu.mean()
    mask = grid.dealias_mask
    u, n, nu = (ifft2(np.where(mask, fft2(a), 0.0)) for a in (u, n, nu))
    return ZakharovState.from_arrays(grid, 0.0, u, n.real, nu.real)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
