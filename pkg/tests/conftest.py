import math

import numpy as np
import pytest

from skdv.spectral_core import ComplexField, Grid1D, RealField


@pytest.fixture
def grid() -> Grid1D:
    return Grid1D(32 * math.pi, 256)


@pytest.fixture
def small_grid() -> Grid1D:
    return Grid1D(16 * math.pi, 128)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(1234))


@pytest.fixture
def gaussian_pair(grid):
    """u0 = exp(-x^2/8) exp(0.5 i x), w0 = 0.5 exp(-x^2/8)"""
    envelope = np.exp(-(grid.x**2) / 8.0)
    return ComplexField(grid, envelope * np.exp(0.5j * grid.x)), RealField(grid, 0.5 * envelope)


def random_field(grid: Grid1D, rng: np.random.Generator, real: bool = False, band: float = 1 / 6):
    """Band-limited random field with O(1) samples"""
    mask = np.abs(grid.mode_indices) <= int(band * grid.points)
    coefficients = (rng.standard_normal(grid.points) + 1j * rng.standard_normal(grid.points)) * mask
    values = np.fft.ifft(coefficients) * math.sqrt(grid.points)
    if real:
        return RealField(grid, values.real)
    return ComplexField(grid, values)
