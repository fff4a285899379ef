"""
Conserved Quantities and Moment Oracles
Mass, momentum and truncated energy of the approximation system, the Lyapunov
combination Q, mixed space-time norms and the Ito mass-drift prediction
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from skdv.cutoffs import TruncationFamily
from skdv.errors import InvalidArgumentError
from skdv.spectral_core import ComplexField, Grid1D, RealField, SpaceTimeField, check_same_grid, derivative, sobolev_norm
from skdv.utils.log import logger

CONSTANT_INTENSITY_TOLERANCE = 1e-4


@dataclass(frozen=True)
class ConservedTriple:
    t: float
    mass: float
    momentum: float
    energy: float
    K: Optional[float] = None


@dataclass(frozen=True)
class MomentSeries:
    """Monte Carlo estimates of E sup_{s<=t} |(u,w)(s)|^{2l}_{H1 x H1}"""

    times: np.ndarray
    estimates: np.ndarray
    standard_errors: np.ndarray
    order: int
    paths: int

    @classmethod
    def from_samples(cls, times: Sequence[float], samples: np.ndarray, order: int) -> "MomentSeries":
        """`samples` has one row per path and one column per time"""
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        paths = samples.shape[0]
        if paths == 0:
            empty = np.zeros(len(times))
            return cls(np.asarray(times, dtype=float), empty, empty, order, 0)
        estimates = samples.mean(axis=0)
        if paths > 1:
            errors = np.sqrt(samples.var(axis=0, ddof=1) / paths)
        else:
            errors = np.zeros_like(estimates)
        return cls(np.asarray(times, dtype=float), estimates, errors, order, paths)


def mass(u: ComplexField) -> float:
    return float(u.grid.dx * np.sum(np.abs(u.values) ** 2))


def momentum(u: ComplexField, w: RealField) -> float:
    """I = int Im(u d_x conj(u)) + w^2/2 dx"""
    grid = check_same_grid(u, w)
    du = derivative(u).values
    density = np.imag(u.values * np.conj(du)) + 0.5 * w.values**2
    return float(grid.dx * np.sum(density))


def energy(u: ComplexField, w: RealField, fam: TruncationFamily) -> float:
    """E = int |u_x|^2 + (|w_x|^2 - psi_2K(w))/2 + phi_K(|u|^2)|u|^2 w + psi_1K(|u|^2) dx"""
    grid = check_same_grid(u, w)
    rho = np.abs(u.values) ** 2
    density = (
        np.abs(derivative(u).values) ** 2
        + 0.5 * (derivative(w).values ** 2 - fam.psi2(w.values))
        + fam.phi(rho) * rho * w.values
        + fam.psi1(rho)
    )
    return float(grid.dx * np.sum(density))


def conserved_triple(u: ComplexField, w: RealField, fam: TruncationFamily, t: float = 0.0) -> ConservedTriple:
    return ConservedTriple(t=t, mass=mass(u), momentum=momentum(u, w), energy=energy(u, w, fam), K=fam.K)


def lyapunov_Q(u: ComplexField, w: RealField, fam: TruncationFamily) -> float:
    """Q = |u|^2 + |u|^10 + |I| + |I|^(5/3) + |E| with L2 norms of u"""
    m = mass(u)
    momentum_value = abs(momentum(u, w))
    return m + m**5 + momentum_value + momentum_value ** (5.0 / 3.0) + abs(energy(u, w, fam))


def h1_pair_norm_sq(u: ComplexField, w: RealField) -> float:
    return sobolev_norm(u, 1.0) ** 2 + sobolev_norm(w, 1.0) ** 2


def lyapunov_lower_bound(u: ComplexField, w: RealField) -> float:
    """|u|_H1^2 + |w|_H1^2 + |u|_L4^4 + |w|_L3^3 + |w|_L2^(10/3)"""
    dx = u.grid.dx
    l4 = dx * np.sum(np.abs(u.values) ** 4)
    l3 = dx * np.sum(np.abs(w.values) ** 3)
    l2 = math.sqrt(dx * np.sum(w.values**2))
    return h1_pair_norm_sq(u, w) + float(l4) + float(l3) + l2 ** (10.0 / 3.0)


class NormOrder(str, Enum):
    SPACE_OUTER = "space-outer"
    TIME_OUTER = "time-outer"


def _lebesgue(values: np.ndarray, exponent: float, weight: float, axis: int) -> np.ndarray:
    if math.isinf(exponent):
        return np.max(values, axis=axis)
    return (weight * np.sum(values**exponent, axis=axis)) ** (1.0 / exponent)


def mixed_norm(
    F: SpaceTimeField, time_exponent: float, space_exponent: float, order: NormOrder = NormOrder.SPACE_OUTER
) -> float:
    """
    Nested Riemann-sum norm of a space-time field.

    SPACE_OUTER is L^r_x L^q_t (time integrated first), TIME_OUTER is L^q_t L^r_x.
    Infinite exponents use the discrete max.
    """
    for name, value in (("time", time_exponent), ("space", space_exponent)):
        if math.isnan(value) or value <= 0:
            raise InvalidArgumentError(f"The {name} exponent must lie in (0, inf], got {value}")
    modulus = np.abs(F.values)
    if NormOrder(order) is NormOrder.SPACE_OUTER:
        inner = _lebesgue(modulus, time_exponent, F.dt, axis=0)
        return float(_lebesgue(inner, space_exponent, F.grid.dx, axis=0))
    inner = _lebesgue(modulus, space_exponent, F.grid.dx, axis=1)
    return float(_lebesgue(inner, time_exponent, F.dt, axis=0))


def constant_intensity(D: RealField, tolerance: float = CONSTANT_INTENSITY_TOLERANCE) -> float:
    """The spatially constant value D_0 of a diffusion intensity"""
    values = np.asarray(D.values)
    scale = float(np.max(np.abs(values)))
    if scale == 0.0:
        return 0.0
    spread = float(np.max(values) - np.min(values)) / scale
    if spread > tolerance:
        raise InvalidArgumentError(
            f"Diffusion intensity varies by {spread:.2e} relative; the mass-drift oracle needs a constant one"
        )
    return float(np.mean(values))


def mass_drift_oracle(initial_mass: float, D: RealField, times: Sequence[float]) -> np.ndarray:
    """Predicted E|u(t)|^2 = |u_0|^2 exp(D_0 t) for alpha = 1, F(u) = u"""
    d0 = constant_intensity(D)
    return initial_mass * np.exp(d0 * np.asarray(times, dtype=float))


@dataclass(frozen=True)
class LyapunovEstimate:
    K: Optional[float]
    trials: int
    constant: float


def estimate_lyapunov_constant(grid: Grid1D, K: Optional[float], trials: int = 500, seed: int = 0) -> LyapunovEstimate:
    """Smallest observed Q / (lower-bound norms) over random band-limited H1 pairs"""
    fam = TruncationFamily(K)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    band = np.abs(grid.mode_indices) <= grid.points // 8
    envelope = np.exp(-((grid.x / (0.1 * grid.length)) ** 2))
    smallest = math.inf
    for _ in range(trials):
        scale_u, scale_w = 10.0 ** rng.uniform(-1.5, 1.0, size=2)
        cu = (rng.standard_normal(grid.points) + 1j * rng.standard_normal(grid.points)) * band
        cw = (rng.standard_normal(grid.points) + 1j * rng.standard_normal(grid.points)) * band
        u_values = envelope * np.fft.ifft(cu) * math.sqrt(grid.points)
        w_values = envelope * np.fft.ifft(cw).real * math.sqrt(grid.points)
        u = ComplexField(grid, scale_u * u_values / max(np.max(np.abs(u_values)), 1e-300))
        w = RealField(grid, scale_w * w_values / max(np.max(np.abs(w_values)), 1e-300))
        bound = lyapunov_lower_bound(u, w)
        if bound > 0:
            smallest = min(smallest, lyapunov_Q(u, w, fam) / bound)
    logger.debug(f"Lyapunov constant estimate for K={K}: {smallest:.4g} over {trials} trials")
    return LyapunovEstimate(K=K, trials=trials, constant=float(smallest))
