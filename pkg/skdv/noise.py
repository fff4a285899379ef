"""
Truncated Cylindrical Wiener Noise
Convolution operators Phi, Psi built on a real trigonometric basis, seeded per-path
increment streams and the multiplicative noise terms of both equations
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Optional, Union

import numpy as np

from skdv.errors import InvalidArgumentError
from skdv.spectral_core import ComplexField, Field, Grid1D, RealField, check_same_grid, project_low, sobolev_norm
from skdv.utils.log import logger

DEFAULT_BASIS_SIZE = 129


class FChoice(str, Enum):
    """Choice of F(u) in the Schrodinger noise term"""

    U = "u"
    CONJ = "conj"
    RE = "re"
    IM = "im"


class Channel(int, Enum):
    """Which Wiener process a stream drives"""

    SCHRODINGER = 1
    KDV = 2


def gaussian_kernel(grid: Grid1D, mass: float, width: float = 1.0) -> RealField:
    """Centered Gaussian A*exp(-x^2/(2 width^2)) with squared L2 norm `mass`"""
    if mass < 0 or width <= 0:
        raise InvalidArgumentError(f"Gaussian kernel needs mass >= 0 and width > 0, got {mass}, {width}")
    amplitude = math.sqrt(mass / (width * math.sqrt(math.pi)))
    return RealField(grid, amplitude * np.exp(-0.5 * (grid.x / width) ** 2))


def delta_kernel(grid: Grid1D) -> RealField:
    """Discrete delta at x = 0, the identity convolution"""
    values = np.zeros(grid.points)
    values[grid.points // 2] = 1.0 / grid.dx
    return RealField(grid, values)


def zero_kernel(grid: Grid1D) -> RealField:
    return RealField.zeros(grid)


def load_kernel_csv(path: Union[str, Path], grid: Grid1D) -> RealField:
    """Read (x, value) samples and resample onto the grid by linear interpolation, zero outside the samples"""
    table = np.genfromtxt(path, delimiter=",", dtype=float)
    table = np.atleast_2d(table)
    if table.shape[1] < 2:
        raise InvalidArgumentError(f"Kernel file {path} needs two columns (x, value)")
    table = table[np.all(np.isfinite(table[:, :2]), axis=1), :2]
    if table.shape[0] < 2:
        raise InvalidArgumentError(f"Kernel file {path} has fewer than two numeric rows")
    order = np.argsort(table[:, 0])
    xs, vs = table[order, 0], table[order, 1]
    logger.debug(f"Loaded kernel from {path}: {xs.size} samples on [{xs[0]}, {xs[-1]}]")
    return RealField(grid, np.interp(grid.x, xs, vs, left=0.0, right=0.0))


def trigonometric_basis(grid: Grid1D, size: int) -> np.ndarray:
    """
    Orthonormal real basis of L2 on the box, as a (size, N) array

    e_0 = 1/sqrt(L), e_{2j-1} = sqrt(2/L) cos(xi_j x), e_{2j} = sqrt(2/L) sin(xi_j x).
    The Nyquist cosine (j = N/2) is normalized by 1/sqrt(L).
    """
    if size < 1 or size > grid.points:
        raise InvalidArgumentError(f"Basis size must lie in [1, {grid.points}], got {size}")
    L = grid.length
    basis = np.empty((size, grid.points))
    basis[0] = 1.0 / math.sqrt(L)
    for k in range(1, size):
        j = (k + 1) // 2
        phase = 2.0 * math.pi * j * grid.x / L
        if j == grid.nyquist_index:
            basis[k] = np.cos(phase) / math.sqrt(L)
        elif k % 2:
            basis[k] = math.sqrt(2.0 / L) * np.cos(phase)
        else:
            basis[k] = math.sqrt(2.0 / L) * np.sin(phase)
    return basis


@dataclass(frozen=True, eq=False)
class NoiseOperator:
    """Convolution operator with its truncated basis and precomputed images Phi e_k"""

    kernel: RealField
    basis_size: int
    label: str
    basis: np.ndarray
    basis_images: np.ndarray

    @property
    def grid(self) -> Grid1D:
        return self.kernel.grid

    @cached_property
    def symbol(self) -> np.ndarray:
        return kernel_symbol(self)


def kernel_symbol(op: Union[NoiseOperator, RealField]) -> np.ndarray:
    """DFT multiplier of periodic convolution with the kernel (kernel sampled with x = 0 at index N/2)"""
    kernel = op.kernel if isinstance(op, NoiseOperator) else op
    return np.fft.fft(np.fft.ifftshift(kernel.values)) * kernel.grid.dx


def build_noise_operator(kernel: RealField, basis_size: int = DEFAULT_BASIS_SIZE, label: str = "phi") -> NoiseOperator:
    """Precompute the truncated basis and its images under convolution with `kernel`"""
    h1 = sobolev_norm(kernel, 1.0)
    l1 = float(np.sum(np.abs(kernel.values)) * kernel.grid.dx)
    if not (math.isfinite(h1) and math.isfinite(l1)):
        raise InvalidArgumentError(f"Kernel '{label}' must lie in H1 and L1")
    grid = kernel.grid
    basis = trigonometric_basis(grid, basis_size)
    symbol = kernel_symbol(kernel)
    images = np.fft.ifft(symbol[None, :] * np.fft.fft(basis, axis=1), axis=1).real
    basis.setflags(write=False)
    images.setflags(write=False)
    logger.debug(f"Noise operator '{label}': N_k={basis_size}, |k|_H1={h1:.4g}, |k|_L1={l1:.4g}")
    return NoiseOperator(kernel=kernel, basis_size=basis_size, label=label, basis=basis, basis_images=images)


def convolve(op: NoiseOperator, f: Field) -> Field:
    """Periodic convolution k * f, computed as the spectral product"""
    check_same_grid(op.kernel, f)
    return type(f).from_spectrum(f.grid, op.symbol * f.spectrum())


@dataclass(frozen=True)
class NoiseStream:
    """
    Deterministic source of standard normals for one (path, channel)

    Each step draws from its own SeedSequence keyed by (path_id, channel, step_index),
    so a path's noise is a pure function of the master seed and never depends on
    scheduling or on how many steps other paths took.
    """

    master_seed: int
    path_id: int
    channel: Channel = Channel.SCHRODINGER

    def generator(self, step_index: int) -> np.random.Generator:
        sequence = np.random.SeedSequence(
            self.master_seed, spawn_key=(self.path_id, int(self.channel), step_index)
        )
        return np.random.default_rng(sequence)


@dataclass(frozen=True, eq=False)
class WienerIncrement:
    """N_k independent N(0, dt) increments of the Brownian motions beta_k"""

    values: np.ndarray
    dt: float
    step_index: int
    path_id: int
    channel: Channel
    master_seed: int

    @property
    def size(self) -> int:
        return self.values.shape[0]


def sample_increment(stream: NoiseStream, dt: float, basis_size: int, step_index: int = 0) -> WienerIncrement:
    if not math.isfinite(dt) or dt <= 0:
        raise InvalidArgumentError(f"Increment time step must be positive, got {dt}")
    if basis_size < 1:
        raise InvalidArgumentError(f"Basis size must be >= 1, got {basis_size}")
    values = stream.generator(step_index).normal(0.0, math.sqrt(dt), basis_size)
    values.setflags(write=False)
    return WienerIncrement(
        values=values,
        dt=dt,
        step_index=step_index,
        path_id=stream.path_id,
        channel=stream.channel,
        master_seed=stream.master_seed,
    )


def noise_field(op: NoiseOperator, inc: WienerIncrement) -> RealField:
    """Sum over k of (Phi e_k) * d beta_k"""
    if inc.size != op.basis_size:
        raise InvalidArgumentError(f"Increment has {inc.size} entries, operator '{op.label}' has {op.basis_size}")
    return RealField(op.grid, inc.values @ op.basis_images)


def _check_power(alpha: int) -> None:
    if int(alpha) != alpha or alpha < 1:
        raise InvalidArgumentError(f"Noise power alpha must be a positive integer, got {alpha}")


def apply_f_choice(u: Union[ComplexField, np.ndarray], f_choice: FChoice) -> np.ndarray:
    """F(u) pointwise; accepts a field or raw samples of any shape"""
    values = np.asarray(u.values if isinstance(u, Field) else u, dtype=np.complex128)
    f_choice = FChoice(f_choice)
    if f_choice is FChoice.U:
        return values
    if f_choice is FChoice.CONJ:
        return np.conj(values)
    if f_choice is FChoice.RE:
        return values.real.astype(np.complex128)
    return values.imag.astype(np.complex128)


def noise_term_schrodinger(
    u: ComplexField,
    op: NoiseOperator,
    inc: WienerIncrement,
    alpha: int = 1,
    f_choice: FChoice = FChoice.U,
    noise_projection_m: Optional[float] = None,
) -> ComplexField:
    """
    F(u)^alpha * Phi dW

    Args:
        noise_projection_m: when set, the noise field is projected by P_m before the product,
            as in the u * P_m(Phi dW) term of the approximation equations.
    """
    _check_power(alpha)
    check_same_grid(u, op.kernel)
    xi = noise_field(op, inc)
    if noise_projection_m is not None:
        xi = project_low(xi, noise_projection_m)
    return ComplexField(u.grid, apply_f_choice(u, f_choice) ** int(alpha) * xi.values)


def noise_term_kdv(
    w: RealField,
    op: NoiseOperator,
    inc: WienerIncrement,
    alpha: int = 1,
    projection_m: Optional[float] = None,
) -> RealField:
    """w^alpha * Psi dW, with an outer P_m when `projection_m` is set"""
    _check_power(alpha)
    check_same_grid(w, op.kernel)
    term = RealField(w.grid, w.values ** int(alpha) * noise_field(op, inc).values)
    if projection_m is not None:
        term = project_low(term, projection_m)
    return term


def diffusion_intensity(op: NoiseOperator) -> RealField:
    """D(x) = sum_k |Phi e_k (x)|^2"""
    return RealField(op.grid, np.sum(op.basis_images**2, axis=0))
