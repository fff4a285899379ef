"""
Periodic-Box Spectral Core
Discretizes the real line as a large periodic box and provides the exact linear
propagators, frequency projections and Sobolev norms used by every other module
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence, Type, TypeVar, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from skdv.errors import AccuracyError, InvalidArgumentError

DEFAULT_BOX_LENGTH = 64 * math.pi
DEFAULT_POINTS = 1024
HOMOGENEOUS_EXPONENT = -3.0 / 8.0
EDGE_FRACTION = 0.05
EDGE_TOLERANCE = 1e-8


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise InvalidArgumentError(f"{name} must be finite, got {value}")


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [-L/2, L/2) with N points, N a power of two"""

    length: float = DEFAULT_BOX_LENGTH
    points: int = DEFAULT_POINTS

    def __post_init__(self):
        if not math.isfinite(self.length) or self.length <= 0:
            raise InvalidArgumentError(f"Box length must be positive and finite, got {self.length}")
        if self.points < 16 or self.points & (self.points - 1):
            raise InvalidArgumentError(f"Point count must be a power of two >= 16, got {self.points}")

    @property
    def dx(self) -> float:
        return self.length / self.points

    @property
    def spectral_weight(self) -> float:
        """Quadrature weight 2*pi/L of one discrete frequency"""
        return 2.0 * math.pi / self.length

    @property
    def nyquist_index(self) -> int:
        return self.points // 2

    @property
    def nyquist(self) -> float:
        return math.pi / self.dx

    @cached_property
    def x(self) -> np.ndarray:
        x = -0.5 * self.length + self.dx * np.arange(self.points)
        x.setflags(write=False)
        return x

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers 2*pi*j/L in FFT order, j in {-N/2, ..., N/2-1}"""
        xi = 2.0 * math.pi * np.fft.fftfreq(self.points, d=self.dx)
        xi.setflags(write=False)
        return xi

    @cached_property
    def odd_wavenumbers(self) -> np.ndarray:
        """Wavenumbers with the unpaired Nyquist mode set to zero, used for odd-order symbols"""
        xi = np.array(self.wavenumbers)
        xi[self.nyquist_index] = 0.0
        xi.setflags(write=False)
        return xi

    @cached_property
    def mode_indices(self) -> np.ndarray:
        idx = np.fft.fftfreq(self.points, d=1.0 / self.points).astype(int)
        idx.setflags(write=False)
        return idx

    def schrodinger_multiplier(self, t: float) -> np.ndarray:
        return np.exp(-1j * self.wavenumbers**2 * t)

    def airy_multiplier(self, t: float) -> np.ndarray:
        return np.exp(1j * self.odd_wavenumbers**3 * t)

    def low_mask(self, m: Optional[float]) -> np.ndarray:
        """Boolean mask of modes with |xi| <= m (None means no cutoff)"""
        if m is None or math.isinf(m):
            return np.ones(self.points, dtype=bool)
        return np.abs(self.wavenumbers) <= m

    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule: keep |j| <= N/3"""
        return np.abs(self.mode_indices) <= self.points // 3

    def nyquist_mask(self) -> np.ndarray:
        mask = np.ones(self.points, dtype=bool)
        mask[self.nyquist_index] = False
        return mask


@dataclass(frozen=True, eq=False)
class Field:
    """Immutable spatial samples on a grid"""

    grid: Grid1D
    values: np.ndarray

    dtype = np.complex128

    def __post_init__(self):
        values = np.array(self.values, dtype=self.dtype, copy=True)
        if values.shape != (self.grid.points,):
            raise InvalidArgumentError(f"Expected {self.grid.points} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("Field samples must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_spectrum(cls: Type[F], grid: Grid1D, spectrum: np.ndarray) -> F:
        return cls(grid, np.fft.ifft(spectrum))

    @classmethod
    def zeros(cls: Type[F], grid: Grid1D) -> F:
        return cls(grid, np.zeros(grid.points))

    def spectrum(self) -> np.ndarray:
        """Raw DFT coefficients in FFT order"""
        return np.fft.fft(self.values)

    def unitary_spectrum(self) -> np.ndarray:
        """Samples of the unitary Fourier transform (1/sqrt(2pi)) int f(x) e^{-i x xi} dx"""
        return self.spectrum() * (self.grid.dx / math.sqrt(2.0 * math.pi))

    def with_values(self: F, values: np.ndarray) -> F:
        return type(self)(self.grid, values)

    def l2_norm(self) -> float:
        return float(math.sqrt(self.grid.dx * np.sum(np.abs(self.values) ** 2)))

    def edge_amplitude(self, fraction: float = EDGE_FRACTION) -> float:
        """Largest modulus within the outer `fraction` of the box on either side"""
        width = max(1, int(self.grid.points * fraction))
        edges = np.concatenate([self.values[:width], self.values[-width:]])
        return float(np.max(np.abs(edges)))

    def __add__(self: F, other: F) -> F:
        check_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self: F, other: F) -> F:
        check_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self: F, scalar: float) -> F:
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__


class ComplexField(Field):
    """Samples of the Schrodinger component u"""

    dtype = np.complex128


class RealField(Field):
    """Samples of the KdV component w"""

    dtype = np.float64

    @classmethod
    def from_spectrum(cls, grid: Grid1D, spectrum: np.ndarray) -> "RealField":
        return cls(grid, np.fft.ifft(spectrum).real)


F = TypeVar("F", bound=Field)
AnyField = Union[ComplexField, RealField]


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Time-stacked complex samples, rows are times t_i = i*dt"""

    grid: Grid1D
    dt: float
    values: np.ndarray
    pad_factor: int = 4

    def __post_init__(self):
        if not math.isfinite(self.dt) or self.dt <= 0:
            raise InvalidArgumentError(f"Time step must be positive, got {self.dt}")
        if self.pad_factor < 1:
            raise InvalidArgumentError(f"Pad factor must be >= 1, got {self.pad_factor}")
        values = np.array(self.values, dtype=np.complex128, copy=True)
        if values.ndim != 2 or values.shape[1] != self.grid.points:
            raise InvalidArgumentError(f"Expected (n_t, {self.grid.points}) samples, got {values.shape}")
        if values.shape[0] < 2:
            raise InvalidArgumentError("A space-time field needs at least two time samples")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("Space-time samples must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_rows(cls, rows: Sequence[Field], dt: float, pad_factor: int = 4) -> "SpaceTimeField":
        if not rows:
            raise InvalidArgumentError("No rows given")
        check_same_grid(*rows)
        return cls(rows[0].grid, dt, np.stack([row.values for row in rows]), pad_factor)

    @property
    def timesteps(self) -> int:
        return self.values.shape[0]

    @property
    def span(self) -> float:
        """Length of the time window, each row covering [t_i, t_i + dt)"""
        return self.timesteps * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.timesteps)

    def with_values(self, values: np.ndarray) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.dt, values, self.pad_factor)

    def row(self, i: int) -> ComplexField:
        return ComplexField(self.grid, self.values[i])

    def real_row(self, i: int) -> RealField:
        return RealField(self.grid, self.values[i].real)

    def __sub__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        if other.grid != self.grid or other.values.shape != self.values.shape:
            raise InvalidArgumentError("Space-time fields live on different grids")
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: complex) -> "SpaceTimeField":
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__


def check_same_grid(*fields: Union[Field, SpaceTimeField]) -> Grid1D:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise InvalidArgumentError(f"Grid mismatch: {f.grid} vs {grid}")
    return grid


def schrodinger_propagate(f: Field, t: float) -> ComplexField:
    """Apply S(t), the flow of du = i u_xx dt"""
    _require_finite("t", t)
    if t == 0:
        return ComplexField(f.grid, f.values)
    return ComplexField.from_spectrum(f.grid, f.spectrum() * f.grid.schrodinger_multiplier(t))


def airy_propagate(g: F, t: float) -> F:
    """Apply U(t), the flow of dw = -w_xxx dt"""
    _require_finite("t", t)
    if t == 0:
        return g.with_values(g.values)
    return type(g).from_spectrum(g.grid, g.spectrum() * g.grid.airy_multiplier(t))


def _check_bound(m: float) -> None:
    if math.isnan(m) or m < 0:
        raise InvalidArgumentError(f"Frequency bound must be >= 0, got {m}")


def project_low(f: F, m: float) -> F:
    """P_m: keep modes with |xi| <= m"""
    _check_bound(m)
    return type(f).from_spectrum(f.grid, np.where(f.grid.low_mask(m), f.spectrum(), 0.0))


def project_high(f: F, m: float) -> F:
    """P_{>=m}: remove modes with |xi| <= m"""
    _check_bound(m)
    return type(f).from_spectrum(f.grid, np.where(f.grid.low_mask(m), 0.0, f.spectrum()))


def bessel_potential(f: F, order: float) -> F:
    """J^order: scale each mode by (1+|xi|)^order"""
    _require_finite("order", order)
    if order == 0:
        return f.with_values(f.values)
    return type(f).from_spectrum(f.grid, f.spectrum() * (1.0 + np.abs(f.grid.wavenumbers)) ** order)


def derivative(f: F, order: int = 1) -> F:
    """Spectral derivative; odd orders drop the Nyquist mode"""
    if order < 0:
        raise InvalidArgumentError(f"Derivative order must be >= 0, got {order}")
    xi = f.grid.odd_wavenumbers if order % 2 else f.grid.wavenumbers
    return type(f).from_spectrum(f.grid, f.spectrum() * (1j * xi) ** order)


def dealias(f: F) -> F:
    return type(f).from_spectrum(f.grid, np.where(f.grid.dealias_mask(), f.spectrum(), 0.0))


def zero_nyquist(f: F) -> F:
    return type(f).from_spectrum(f.grid, np.where(f.grid.nyquist_mask(), f.spectrum(), 0.0))


def sobolev_weight(grid: Grid1D, s: float, homogeneous_exponent: Optional[float] = None) -> np.ndarray:
    """Spectral weight (1+|xi|)^{2s}, times |xi|^{2h} without the zero mode when h is set"""
    _require_finite("s", s)
    xi = np.abs(grid.wavenumbers)
    weight = (1.0 + xi) ** (2.0 * s)
    if homogeneous_exponent is not None:
        if not math.isclose(homogeneous_exponent, HOMOGENEOUS_EXPONENT):
            raise InvalidArgumentError(
                f"Only the homogeneous exponent {HOMOGENEOUS_EXPONENT} is supported, got {homogeneous_exponent}"
            )
        nonzero = xi > 0
        weight = np.where(nonzero, weight * np.where(nonzero, xi, 1.0) ** (2.0 * homogeneous_exponent), 0.0)
    return weight


def sobolev_norm(f: Field, s: float, homogeneous_exponent: Optional[float] = None) -> float:
    """Riemann-sum H^s norm with spectral weight 2*pi/L (optionally homogeneous H-dot^{-3/8} weighted)"""
    weight = sobolev_weight(f.grid, s, homogeneous_exponent)
    energy = np.sum(weight * np.abs(f.unitary_spectrum()) ** 2) * f.grid.spectral_weight
    return float(math.sqrt(energy))


def assert_edge_decay(f: Field, tolerance: float = EDGE_TOLERANCE) -> None:
    """Reject data that does not decay near the box edges (the box stands in for the real line)"""
    edge = f.edge_amplitude()
    if edge > tolerance:
        raise InvalidArgumentError(
            f"Field amplitude {edge:.3e} near the box edges exceeds {tolerance:.0e}; enlarge the box"
        )


class Propagator(str, Enum):
    """Linear flow used by the Duhamel and stochastic integrals"""

    SCHRODINGER = "schrodinger"
    AIRY = "airy"

    def multipliers(self, grid: Grid1D, times: np.ndarray) -> np.ndarray:
        """(n_t, N) array of symbols of the flow at each time"""
        t = np.asarray(times, dtype=float)[:, None]
        if self is Propagator.SCHRODINGER:
            return np.exp(-1j * grid.wavenumbers[None, :] ** 2 * t)
        return np.exp(1j * grid.odd_wavenumbers[None, :] ** 3 * t)


DUHAMEL_TOLERANCE = 1e-3


def duhamel_integral(
    f: SpaceTimeField,
    propagator: Propagator = Propagator.SCHRODINGER,
    tolerance: Optional[float] = DUHAMEL_TOLERANCE,
) -> SpaceTimeField:
    """
    int_0^{t_i} S(t_i - r) f(r) dr on the stored time grid

    Works in the interaction picture: S(-r) f(r) is integrated by the composite trapezoid
    rule and propagated back exactly. The same sum on every other sample serves as the
    step-halving error estimate; relative disagreement above `tolerance` raises AccuracyError.
    """
    propagator = Propagator(propagator)
    forward = propagator.multipliers(f.grid, f.times)
    pulled_back = np.fft.fft(f.values, axis=1) * np.conj(forward)
    fine = cumulative_trapezoid(pulled_back, dx=f.dt, axis=0, initial=0)
    if tolerance is not None and f.timesteps >= 5:
        coarse = cumulative_trapezoid(pulled_back[::2], dx=2.0 * f.dt, axis=0, initial=0)
        reference = float(np.linalg.norm(fine[::2]))
        if reference > 0:
            disagreement = float(np.linalg.norm(fine[::2] - coarse)) / reference
            if disagreement > tolerance:
                raise AccuracyError(
                    f"Duhamel quadrature step-halving disagreement {disagreement:.2e} exceeds {tolerance:.0e}; "
                    f"refine the time grid"
                )
    return f.with_values(np.fft.ifft(fine * forward, axis=1))


def stochastic_integral(increments: SpaceTimeField, propagator: Propagator = Propagator.SCHRODINGER) -> SpaceTimeField:
    """
    Ito sum sum_{j<i} S(t_i - t_j) G_j, where row j of `increments` is the
    noise contribution G(t_j) dW_j taken at the left endpoint
    """
    propagator = Propagator(propagator)
    forward = propagator.multipliers(increments.grid, increments.times)
    pulled_back = np.fft.fft(increments.values, axis=1) * np.conj(forward)
    summed = np.zeros_like(pulled_back)
    summed[1:] = np.cumsum(pulled_back[:-1], axis=0)
    return increments.with_values(np.fft.ifft(summed * forward, axis=1))


def time_window(timesteps: int, ramp_fraction: float = 0.1) -> np.ndarray:
    """C2 taper: quintic ramps over the first and last `ramp_fraction` of the samples, 1 in between"""
    if timesteps < 2:
        raise InvalidArgumentError(f"Need at least two samples, got {timesteps}")
    ramp = max(1, int(round(ramp_fraction * timesteps)))
    window = np.ones(timesteps)
    z = np.arange(ramp) / ramp
    rise = z**3 * (10.0 - 15.0 * z + 6.0 * z**2)
    window[:ramp] = rise
    window[timesteps - ramp :] = rise[::-1]
    return window


def random_spacetime_field(
    grid: Grid1D,
    timesteps: int,
    dt: float,
    rng: np.random.Generator,
    band_fraction: float = 1.0 / 6.0,
    real: bool = False,
    pad_factor: int = 4,
) -> SpaceTimeField:
    """
    Time-windowed field with complex Gaussian coefficients on modes |j| <= N*band_fraction,
    drawn independently at every time sample
    """
    band = np.abs(grid.mode_indices) <= int(grid.points * band_fraction)
    shape = (timesteps, grid.points)
    coefficients = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * band[None, :]
    values = np.fft.ifft(coefficients, axis=1) * math.sqrt(grid.points)
    if real:
        values = values.real
    return SpaceTimeField(grid, dt, values * time_window(timesteps)[:, None], pad_factor)
