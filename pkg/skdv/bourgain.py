"""
Bourgain Restricted-Norm Engine
Discrete X_{b,s}, Y_{b,s} and Y_{b,s,-3/8} norms of space-time fields, their sharp-cut
restrictions to [0, T], and randomized probes of the bilinear, trilinear, power and
Duhamel estimates these spaces satisfy
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field
from scipy import integrate

from skdv.cutoffs import SMOOTHSTEP, localize_by_norm
from skdv.errors import InvalidArgumentError, PreconditionError
from skdv.functionals import NormOrder, mixed_norm
from skdv.spectral_core import (
    Grid1D,
    Propagator,
    SpaceTimeField,
    duhamel_integral,
    random_spacetime_field,
    sobolev_norm,
)
from skdv.utils.log import logger

WINDOW_TOLERANCE = 1e-6
DEFAULT_EXPONENT = 0.45
STABILITY_FACTOR = 2.0


class Dispersion(str, Enum):
    SCHRODINGER = "schrodinger"
    KDV = "kdv"


@dataclass(frozen=True)
class BourgainWeight:
    """
    (1+|xi|)^{2s} <tau + xi^2>^{2b} for Schrodinger, (1+|xi|)^{2s} <tau - xi^3>^{2b} for KdV,
    optionally times |xi|^{-3/4} (KdV only), with <z> = 1 + |z|
    """

    dispersion: Dispersion
    b: float
    s: float = 1.0
    homogeneous: bool = False

    def __post_init__(self):
        if not (-1.0 < self.b <= 1.0):
            raise InvalidArgumentError(f"Modulation exponent b must lie in (-1, 1], got {self.b}")
        if not math.isfinite(self.s) or self.s < 0:
            raise InvalidArgumentError(f"Regularity exponent s must be >= 0, got {self.s}")
        if self.homogeneous and Dispersion(self.dispersion) is not Dispersion.KDV:
            raise InvalidArgumentError("The homogeneous weight is defined for the KdV dispersion only")

    def evaluate(self, grid: Grid1D, taus: np.ndarray) -> np.ndarray:
        """(P, N) weight array on the (tau, xi) lattice"""
        xi = grid.wavenumbers
        if Dispersion(self.dispersion) is Dispersion.SCHRODINGER:
            modulation = taus[:, None] + xi[None, :] ** 2
        else:
            modulation = taus[:, None] - grid.odd_wavenumbers[None, :] ** 3
        weight = (1.0 + np.abs(xi))[None, :] ** (2.0 * self.s) * (1.0 + np.abs(modulation)) ** (2.0 * self.b)
        if self.homogeneous:
            magnitude = np.abs(xi)
            homogeneous = np.where(magnitude > 0, np.where(magnitude > 0, magnitude, 1.0) ** -0.75, 0.0)
            weight = weight * homogeneous[None, :]
        return weight


def x_weight(b: float, s: float = 1.0) -> BourgainWeight:
    return BourgainWeight(Dispersion.SCHRODINGER, b, s)


def y_weight(b: float, s: float = 1.0, homogeneous: bool = False) -> BourgainWeight:
    return BourgainWeight(Dispersion.KDV, b, s, homogeneous)


def _padded(F: SpaceTimeField) -> np.ndarray:
    total = F.pad_factor * F.timesteps
    before = (total - F.timesteps) // 2
    padded = np.zeros((total, F.grid.points), dtype=np.complex128)
    padded[before : before + F.timesteps] = F.values
    return padded


def _check_windowed(F: SpaceTimeField) -> None:
    """The zero-padded transform needs the samples themselves to vanish at both ends of the span"""
    peak = float(np.max(np.abs(F.values)))
    if peak == 0.0:
        return
    leak = max(float(np.max(np.abs(F.values[0]))), float(np.max(np.abs(F.values[-1]))))
    if leak > WINDOW_TOLERANCE * peak:
        raise PreconditionError(
            f"Field is not windowed in time: end-sample amplitude {leak:.3e} vs peak {peak:.3e}; "
            f"taper it with time_window or use restricted_norm"
        )


def _lattice_norm(F: SpaceTimeField, w: BourgainWeight) -> float:
    padded = _padded(F)
    total = padded.shape[0]
    transform = np.fft.fft2(padded) * (F.grid.dx * F.dt / (2.0 * math.pi))
    taus = 2.0 * math.pi * np.fft.fftfreq(total, d=F.dt)
    weight = w.evaluate(F.grid, taus)
    cell = F.grid.spectral_weight * 2.0 * math.pi / (total * F.dt)
    return float(math.sqrt(np.sum(weight * np.abs(transform) ** 2) * cell))


def spacetime_norm(F: SpaceTimeField, w: BourgainWeight) -> float:
    """
    Weighted l2 sum over the discrete (xi, tau) lattice of the zero-padded 2D transform,
    with spectral weights 2*pi/L and 2*pi/(P dt); the field must be windowed in time
    """
    _check_windowed(F)
    return _lattice_norm(F, w)


def _check_restricted(w: BourgainWeight) -> None:
    if w.b >= 0.5:
        raise InvalidArgumentError(f"Sharp-cut restricted norms need b < 1/2, got {w.b}")


def restricted_norm(F: SpaceTimeField, T: float, w: BourgainWeight) -> float:
    """
    Norm of the field with every row at t_i >= T set to zero; the cut at T is sharp,
    so the lattice sum is taken without the windowing check
    """
    _check_restricted(w)
    if math.isnan(T):
        raise InvalidArgumentError("T must be a number")
    if T <= 0:
        return 0.0
    if T >= F.span:
        return _lattice_norm(F, w)
    keep = F.times < T
    if not np.any(keep):
        return 0.0
    return _lattice_norm(F.with_values(F.values * keep[:, None]), w)


def running_norm(F: SpaceTimeField, w: BourgainWeight) -> np.ndarray:
    """
    Running restricted norm at every stored sample: entry i is the largest sharp-cut
    norm over [0, t_j + dt), j <= i, hence nondecreasing
    """
    _check_restricted(w)
    cuts = np.array([restricted_norm(F, (i + 1) * F.dt, w) for i in range(F.timesteps)])
    return np.maximum.accumulate(cuts)


def tilde_y_norm(F: SpaceTimeField, b: float, s: float = 1.0, T: Optional[float] = None) -> float:
    """Y_{b,s} + Y_{b,s,-3/8}, restricted to [0, T] when T is given"""
    plain, weighted = y_weight(b, s), y_weight(b, s, homogeneous=True)
    if T is None:
        return spacetime_norm(F, plain) + spacetime_norm(F, weighted)
    return restricted_norm(F, T, plain) + restricted_norm(F, T, weighted)


def running_tilde_y_norm(F: SpaceTimeField, b: float, s: float = 1.0) -> np.ndarray:
    cuts = np.array([tilde_y_norm(F, b, s, (i + 1) * F.dt) for i in range(F.timesteps)])
    return np.maximum.accumulate(cuts)


class ProbeReport(BaseModel):
    """Grid-stability summary of one randomized estimate probe"""

    lemma: str
    exponents: Dict[str, float]
    trials: int
    max_ratio: float = Field(ge=0)
    refined_max_ratio: float = Field(ge=0)
    stable: bool
    details: Dict[str, float] = Field(default_factory=dict)

    @classmethod
    def from_ratios(
        cls, lemma: str, exponents: Dict[str, float], coarse: Sequence[float], refined: Sequence[float], **details: float
    ) -> "ProbeReport":
        coarse_max = max(coarse, default=0.0)
        refined_max = max(refined, default=0.0)
        stable = bool(math.isfinite(refined_max) and refined_max <= STABILITY_FACTOR * coarse_max)
        report = cls(
            lemma=lemma,
            exponents=exponents,
            trials=len(coarse),
            max_ratio=coarse_max,
            refined_max_ratio=refined_max,
            stable=stable,
            details=details,
        )
        if not stable:
            logger.warning(f"Probe {lemma} is grid-unstable: {coarse_max:.4g} -> {refined_max:.4g}")
        return report


class SlopeReport(BaseModel):
    """Least-squares log-log slope of a scaling experiment against its expected value"""

    lemma: str
    exponents: Dict[str, float]
    trials: int
    abscissae: List[float]
    values: List[float]
    slope: float
    expected_slope: float
    tolerance: float
    within_tolerance: bool


def fit_slope(abscissae: Sequence[float], values: Sequence[float]) -> float:
    return float(np.polyfit(np.log(abscissae), np.log(values), 1)[0])


@dataclass(frozen=True)
class ProbeGrid:
    """Coarse resolution of the randomized probes; the refined run doubles points and timesteps"""

    length: float = 32 * math.pi
    points: int = 128
    timesteps: int = 128
    span: float = 1.0
    band_fraction: float = 1.0 / 6.0

    def level(self, refined: bool) -> "tuple[Grid1D, int, float]":
        factor = 2 if refined else 1
        timesteps = self.timesteps * factor
        return Grid1D(self.length, self.points * factor), timesteps, self.span / timesteps


def _trial_rng(seed: int, lemma: str, trial: int, refined: bool) -> np.random.Generator:
    key = zlib.crc32(lemma.encode())
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key, trial, int(refined))))


def _run_trials(
    ratio: Callable[[np.random.Generator, Grid1D, int, float], Optional[float]],
    lemma: str,
    trials: int,
    seed: int,
    probe_grid: ProbeGrid,
) -> "tuple[list[float], list[float]]":
    """Collect ratios at the coarse and refined resolutions; None results (zero inputs) are skipped"""
    collected: "dict[bool, list[float]]" = {False: [], True: []}
    for refined in (False, True):
        grid, timesteps, dt = probe_grid.level(refined)
        for trial in range(trials):
            value = ratio(_trial_rng(seed, lemma, trial, refined), grid, timesteps, dt)
            if value is not None:
                collected[refined].append(value)
        logger.debug(f"{lemma} {'refined' if refined else 'coarse'}: max ratio {max(collected[refined], default=0):.4g}")
    return collected[False], collected[True]


def _random(rng, grid, timesteps, dt, probe_grid: ProbeGrid, real: bool = False) -> SpaceTimeField:
    return random_spacetime_field(grid, timesteps, dt, rng, band_fraction=probe_grid.band_fraction, real=real)


def _x_derivative(values: np.ndarray, grid: Grid1D) -> np.ndarray:
    return np.fft.ifft(1j * grid.odd_wavenumbers[None, :] * np.fft.fft(values, axis=1), axis=1)


def _bracket(z: float) -> float:
    return 1.0 + abs(z)


def probe_basic_inequality(a: float, b: float, alpha: float, beta: float) -> float:
    """int <x-alpha>^{-2a} <x-beta>^{-2b} dx divided by <alpha-beta>^{1-2a-2b}"""
    for name, value in (("a", a), ("b", b)):
        if not (0.25 < value < 0.5):
            raise InvalidArgumentError(f"Exponent {name} must lie in (1/4, 1/2), got {value}")

    def integrand(x: float) -> float:
        return _bracket(x - alpha) ** (-2 * a) * _bracket(x - beta) ** (-2 * b)

    lo, hi = sorted((alpha, beta))
    options = dict(epsabs=1e-13, epsrel=1e-12, limit=500)
    total = integrate.quad(integrand, -np.inf, lo, **options)[0]
    if hi > lo:
        total += integrate.quad(integrand, lo, hi, **options)[0]
    total += integrate.quad(integrand, hi, np.inf, **options)[0]
    return total / _bracket(alpha - beta) ** (1 - 2 * a - 2 * b)


def probe_bilinear_schrodinger(
    a: float = DEFAULT_EXPONENT, b: float = DEFAULT_EXPONENT, trials: int = 100, seed: int = 0, probe_grid: ProbeGrid = ProbeGrid()
) -> ProbeReport:
    """max |g h|_{X_{-a,1}} / (|g|_{X_{b,1}} |h|_{Y_{b,1}}) over random windowed pairs"""
    if not (0.25 < a < 0.5 and 0.25 < b < 0.5 and a + 2 * b > 1):
        raise InvalidArgumentError(f"Need a, b in (1/4, 1/2) and a + 2b > 1, got a={a}, b={b}")

    def ratio(rng, grid, timesteps, dt):
        g = _random(rng, grid, timesteps, dt, probe_grid)
        h = _random(rng, grid, timesteps, dt, probe_grid, real=True)
        denominator = spacetime_norm(g, x_weight(b)) * spacetime_norm(h, y_weight(b))
        if denominator == 0:
            return None
        return spacetime_norm(g.with_values(g.values * h.values), x_weight(-a)) / denominator

    coarse, refined = _run_trials(ratio, "bilinear_schrodinger", trials, seed, probe_grid)
    return ProbeReport.from_ratios("bilinear_schrodinger", {"a": a, "b": b}, coarse, refined)


def probe_trilinear(
    a: float = DEFAULT_EXPONENT, b: float = DEFAULT_EXPONENT, trials: int = 100, seed: int = 0, probe_grid: ProbeGrid = ProbeGrid()
) -> ProbeReport:
    """max ||u|^2 u|_{X_{-a,1}} / |u|^3_{X_{b,1}}"""
    if not (0.375 < a < 0.5 and 0.375 < b < 0.5):
        raise InvalidArgumentError(f"Need a, b in (3/8, 1/2), got a={a}, b={b}")

    def ratio(rng, grid, timesteps, dt):
        u = _random(rng, grid, timesteps, dt, probe_grid)
        denominator = spacetime_norm(u, x_weight(b)) ** 3
        if denominator == 0:
            return None
        return spacetime_norm(u.with_values(np.abs(u.values) ** 2 * u.values), x_weight(-a)) / denominator

    coarse, refined = _run_trials(ratio, "trilinear", trials, seed, probe_grid)
    return ProbeReport.from_ratios("trilinear", {"a": a, "b": b}, coarse, refined)


def probe_bilinear_kdv(
    a: float = DEFAULT_EXPONENT,
    b: float = DEFAULT_EXPONENT,
    weighted: bool = False,
    trials: int = 100,
    seed: int = 0,
    probe_grid: ProbeGrid = ProbeGrid(),
) -> ProbeReport:
    """max |d_x(g conj h)|_{Y_{-a,1}} (or Y_{-a,1,-3/8}) / (|g|_{X_{b,1}} |h|_{X_{b,1}})"""
    if not (0.25 < a < 0.5 and 1.0 / 3.0 < b < 0.5 and a + 2 * b > 4.0 / 3.0):
        raise InvalidArgumentError(f"Need a in (1/4,1/2), b in (1/3,1/2), a + 2b > 4/3, got a={a}, b={b}")
    target = y_weight(-a, homogeneous=weighted)
    lemma = "bilinear_kdv_weighted" if weighted else "bilinear_kdv"

    def ratio(rng, grid, timesteps, dt):
        g = _random(rng, grid, timesteps, dt, probe_grid)
        h = _random(rng, grid, timesteps, dt, probe_grid)
        denominator = spacetime_norm(g, x_weight(b)) * spacetime_norm(h, x_weight(b))
        if denominator == 0:
            return None
        product = g.with_values(_x_derivative(g.values * np.conj(h.values), grid))
        return spacetime_norm(product, target) / denominator

    coarse, refined = _run_trials(ratio, lemma, trials, seed, probe_grid)
    return ProbeReport.from_ratios(lemma, {"a": a, "b": b, "weighted": float(weighted)}, coarse, refined)


def b_alpha(alpha: int) -> float:
    """Threshold (1/2 - 1/(4(alpha-1))) v 3/8; alpha = 1 gives 3/8"""
    if alpha < 1:
        raise InvalidArgumentError(f"alpha must be a positive integer, got {alpha}")
    if alpha == 1:
        return 0.375
    return max(0.5 - 1.0 / (4.0 * (alpha - 1)), 0.375)


def probe_power(
    alpha: int = 2, b: float = DEFAULT_EXPONENT, trials: int = 100, seed: int = 0, probe_grid: ProbeGrid = ProbeGrid()
) -> ProbeReport:
    """max |u^alpha|_{X^T_{0,1}} / |u|^alpha_{X^T_{b,1}}"""
    if alpha not in (2, 3, 4):
        raise InvalidArgumentError(f"alpha must be one of 2, 3, 4, got {alpha}")
    if b <= b_alpha(alpha) or b >= 0.5:
        raise InvalidArgumentError(f"Need b_alpha = {b_alpha(alpha)} < b < 1/2, got {b}")

    def ratio(rng, grid, timesteps, dt):
        u = _random(rng, grid, timesteps, dt, probe_grid)
        T = u.span
        denominator = restricted_norm(u, T, x_weight(b)) ** alpha
        if denominator == 0:
            return None
        return restricted_norm(u.with_values(u.values**alpha), T, x_weight(0.0)) / denominator

    lemma = f"power_{alpha}"
    coarse, refined = _run_trials(ratio, lemma, trials, seed, probe_grid)
    return ProbeReport.from_ratios(lemma, {"alpha": alpha, "b": b, "b_alpha": b_alpha(alpha)}, coarse, refined)


def probe_duhamel_gain(
    a: float = DEFAULT_EXPONENT,
    b: float = DEFAULT_EXPONENT,
    horizons: Sequence[float] = (0.05, 0.1, 0.2, 0.4),
    trials: int = 20,
    seed: int = 0,
    grid: Optional[Grid1D] = None,
    timesteps: int = 64,
    tolerance: float = 0.25,
) -> SlopeReport:
    """
    Fit log g(T) against log T, g(T) = |int_0^t S(t-s) f ds|_{X^T_{b,1}} / |f|_{X^T_{-a,1}},
    for inputs f = S(t) f_0 with random band-limited f_0
    """
    if not (0 < a < 1 and 0 < b < 1 and a + b < 1):
        raise InvalidArgumentError(f"Need a, b in (0, 1) with a + b < 1, got a={a}, b={b}")
    if any(T <= 0 or T > 1 for T in horizons) or len(horizons) < 2:
        raise InvalidArgumentError(f"Need at least two horizons in (0, 1], got {list(horizons)}")
    grid = grid or Grid1D(32 * math.pi, 128)
    band = np.abs(grid.mode_indices) <= grid.points // 6
    means = np.zeros(len(horizons))
    slopes = []
    for trial in range(trials):
        rng = _trial_rng(seed, "duhamel_gain", trial, False)
        coefficients = (rng.standard_normal(grid.points) + 1j * rng.standard_normal(grid.points)) * band
        initial = np.fft.ifft(coefficients) * math.sqrt(grid.points)
        gains = []
        for T in horizons:
            dt = T / timesteps
            times = dt * np.arange(timesteps)
            rows = np.fft.ifft(
                Propagator.SCHRODINGER.multipliers(grid, times) * np.fft.fft(initial)[None, :], axis=1
            )
            f = SpaceTimeField(grid, dt, rows)
            duhamel = duhamel_integral(f, Propagator.SCHRODINGER)
            gains.append(restricted_norm(duhamel, T, x_weight(b)) / restricted_norm(f, T, x_weight(-a)))
        means += np.asarray(gains) / trials
        slopes.append(fit_slope(horizons, gains))
    slope = float(np.mean(slopes))
    expected = 1.0 - (a + b)
    logger.info(f"Duhamel gain slope {slope:.3f} (expected {expected:.3f})")
    return SlopeReport(
        lemma="duhamel_gain",
        exponents={"a": a, "b": b},
        trials=trials,
        abscissae=list(horizons),
        values=means.tolist(),
        slope=slope,
        expected_slope=expected,
        tolerance=tolerance,
        within_tolerance=abs(slope - expected) <= tolerance,
    )


COUNTEREXAMPLE_GRID = Grid1D(64.0, 4096)
COUNTEREXAMPLE_RAMP = 0.25
SAMPLES_PER_SLOT = 4


def counterexample_profile(x: np.ndarray, ramp: float = COUNTEREXAMPLE_RAMP) -> np.ndarray:
    """1 on [0, 1], quintic ramps on [-ramp, 0] and [1, 1 + ramp], 0 elsewhere"""
    rise = SMOOTHSTEP(np.clip((x + ramp) / ramp, 0.0, 1.0))
    fall = 1.0 - SMOOTHSTEP(np.clip((x - 1.0) / ramp, 0.0, 1.0))
    return np.where(x < 0.5, rise, fall)


@dataclass(frozen=True)
class CounterexampleNorms:
    n: int
    sup_h1: float
    mixed: float


def counterexample_norms(
    n: int,
    r: float,
    q: float,
    profile: Callable[[np.ndarray], np.ndarray] = counterexample_profile,
    grid: Grid1D = COUNTEREXAMPLE_GRID,
) -> CounterexampleNorms:
    """
    u_n(t, x) = phi(x - x_j) during the j-th of n equal time slots of [0, 1], x_j = -L/4 + j,
    returning (|u_n|_{L^inf_t H^1_x}, |u_n|_{L^r_x L^q_t})
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    start = -0.25 * grid.length
    if start + (n - 1) + 2.0 > 0.5 * grid.length:
        raise InvalidArgumentError(f"A box of length {grid.length} cannot hold {n} unit translates")
    dt = 1.0 / (SAMPLES_PER_SLOT * n)
    blocks = np.stack([profile(grid.x - (start + j)) for j in range(n)])
    field = SpaceTimeField(grid, dt, np.repeat(blocks, SAMPLES_PER_SLOT, axis=0))
    sup_h1 = max(sobolev_norm(field.row(i), 1.0) for i in range(0, field.timesteps, SAMPLES_PER_SLOT))
    return CounterexampleNorms(n=n, sup_h1=sup_h1, mixed=mixed_norm(field, q, r, NormOrder.SPACE_OUTER))


def counterexample_slope(
    ns: Sequence[int] = (4, 8, 16, 32), r: float = 2.0, q: float = 8.0, tolerance: float = 0.05
) -> SlopeReport:
    norms = [counterexample_norms(n, r, q) for n in ns]
    mixed = [item.mixed for item in norms]
    slope = fit_slope(ns, mixed)
    expected = 1.0 / r - 1.0 / q
    return SlopeReport(
        lemma="counterexample",
        exponents={"r": r, "q": q},
        trials=len(ns),
        abscissae=[float(n) for n in ns],
        values=mixed,
        slope=slope,
        expected_slope=expected,
        tolerance=tolerance,
        within_tolerance=abs(slope - expected) <= tolerance,
    )


def probe_localization(
    R: float = 1.0, b: float = DEFAULT_EXPONENT, trials: int = 100, seed: int = 0, probe_grid: ProbeGrid = ProbeGrid()
) -> "tuple[ProbeReport, ProbeReport]":
    """
    Bound |theta_R(running norm) u|_{X^T_{b,1}} <= C R and the Lipschitz companion
    |u~1 - u~2| <= C |u1 - u2| over random inputs scaled across the cutoff band
    """
    weight = x_weight(b)

    def localized(u: SpaceTimeField) -> SpaceTimeField:
        return localize_by_norm(running_norm(u, weight), u, R)

    def bound(rng, grid, timesteps, dt):
        u = _random(rng, grid, timesteps, dt, probe_grid)
        total = spacetime_norm(u, weight)
        if total == 0:
            return None
        u = u * (R * rng.uniform(0.5, 3.0) / total)
        return spacetime_norm(localized(u), weight) / R

    def lipschitz(rng, grid, timesteps, dt):
        u1 = _random(rng, grid, timesteps, dt, probe_grid)
        total = spacetime_norm(u1, weight)
        if total == 0:
            return None
        u1 = u1 * (R * rng.uniform(0.5, 3.0) / total)
        u2 = u1.with_values(u1.values + 0.05 * _random(rng, grid, timesteps, dt, probe_grid).values * R / total)
        denominator = spacetime_norm(u1 - u2, weight)
        if denominator == 0:
            return None
        return spacetime_norm(localized(u1) - localized(u2), weight) / denominator

    coarse, refined = _run_trials(bound, "localization_bound", trials, seed, probe_grid)
    bound_report = ProbeReport.from_ratios("localization_bound", {"R": R, "b": b}, coarse, refined)
    coarse, refined = _run_trials(lipschitz, "localization_lipschitz", trials, seed, probe_grid)
    lipschitz_report = ProbeReport.from_ratios("localization_lipschitz", {"R": R, "b": b}, coarse, refined)
    return bound_report, lipschitz_report


def probe_embedding(
    b_prime: float = 0.75, trials: int = 50, seed: int = 0, probe_grid: ProbeGrid = ProbeGrid()
) -> ProbeReport:
    """max sup_t |F(t)|_{H^1} / |F|_{X_{b',1}} for b' > 1/2"""
    if not (0.5 < b_prime <= 1.0):
        raise InvalidArgumentError(f"Need 1/2 < b' <= 1, got {b_prime}")

    def ratio(rng, grid, timesteps, dt):
        F = _random(rng, grid, timesteps, dt, probe_grid)
        denominator = spacetime_norm(F, x_weight(b_prime))
        if denominator == 0:
            return None
        return max(sobolev_norm(F.row(i), 1.0) for i in range(F.timesteps)) / denominator

    coarse, refined = _run_trials(ratio, "embedding", trials, seed, probe_grid)
    return ProbeReport.from_ratios("embedding", {"b_prime": b_prime}, coarse, refined)
