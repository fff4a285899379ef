"""
Experiment configuration
One JSON document per run; every nested model rejects unknown keys
"""

import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from skdv.bourgain import DEFAULT_EXPONENT, ProbeGrid
from skdv.dynamics import APPROXIMATIONS, SHIFTABLE, ApproxParams, Hierarchy, Scheme, SchemeConfig, SystemParams
from skdv.errors import InvalidArgumentError
from skdv.noise import (
    DEFAULT_BASIS_SIZE,
    FChoice,
    NoiseOperator,
    build_noise_operator,
    delta_kernel,
    gaussian_kernel,
    load_kernel_csv,
    zero_kernel,
)
from skdv.spectral_core import DEFAULT_BOX_LENGTH, DEFAULT_POINTS, ComplexField, Grid1D, RealField, assert_edge_decay


class Scenario(str, Enum):
    SIMULATE = "simulate"
    ENSEMBLE = "ensemble"
    CONSERVE = "conserve"
    PROBE = "probe"
    CONTRACTION = "contraction"
    COUNTEREXAMPLE = "counterexample"
    HIERARCHY = "hierarchy"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _gaussian(x: np.ndarray, width: float) -> np.ndarray:
    return np.exp(-0.5 * (x / width) ** 2)


class GridSpec(StrictModel):
    length: float = Field(DEFAULT_BOX_LENGTH, gt=0)
    points: int = Field(DEFAULT_POINTS, ge=4)

    @field_validator("points")
    def check_even(cls, points):
        if points % 2:
            raise ValueError(f"Grid points must be even, got {points}")
        return points

    def build(self) -> Grid1D:
        return Grid1D(self.length, self.points)


class KernelPreset(str, Enum):
    GAUSSIAN = "gaussian"
    ZERO = "zero"
    DELTA = "delta"
    CSV = "csv"


class KernelSpec(StrictModel):
    """A named kernel preset, or samples read from a CSV of (x, value) rows"""

    preset: KernelPreset = KernelPreset.GAUSSIAN
    mass: float = Field(0.25, ge=0)
    width: float = Field(1.0, gt=0)
    path: Optional[Path] = None

    @model_validator(mode="after")
    def check_path(self) -> "KernelSpec":
        if self.preset is KernelPreset.CSV and self.path is None:
            raise ValueError("The csv kernel preset needs a path")
        return self

    def build(self, grid: Grid1D) -> RealField:
        if self.preset is KernelPreset.GAUSSIAN:
            return gaussian_kernel(grid, self.mass, self.width)
        elif self.preset is KernelPreset.ZERO:
            return zero_kernel(grid)
        elif self.preset is KernelPreset.DELTA:
            return delta_kernel(grid)
        return load_kernel_csv(self.path, grid)


class NoiseSpec(StrictModel):
    enabled: bool = True
    phi: KernelSpec = KernelSpec()
    psi: KernelSpec = KernelSpec()
    basis_size: int = Field(DEFAULT_BASIS_SIZE, ge=1)

    def operators(self, grid: Grid1D) -> Tuple[NoiseOperator, NoiseOperator]:
        if self.basis_size > grid.points:
            raise InvalidArgumentError(f"Basis size {self.basis_size} exceeds the {grid.points} grid points")
        return (
            build_noise_operator(self.phi.build(grid), self.basis_size, "phi"),
            build_noise_operator(self.psi.build(grid), self.basis_size, "psi"),
        )


class InitialDataSpec(StrictModel):
    """u0 = A exp(-x^2 / 2s^2) exp(ikx), w0 = B exp(-x^2 / 2r^2)"""

    u_amplitude: float = 1.0
    u_width: float = Field(2.0, gt=0)
    u_wavenumber: float = 0.0
    w_amplitude: float = 0.5
    w_width: float = Field(2.0, gt=0)

    def build(self, grid: Grid1D) -> Tuple[ComplexField, RealField]:
        x = grid.x
        u0 = ComplexField(grid, self.u_amplitude * _gaussian(x, self.u_width) * np.exp(1j * self.u_wavenumber * x))
        w0 = RealField(grid, self.w_amplitude * _gaussian(x, self.w_width))
        assert_edge_decay(u0)
        assert_edge_decay(w0)
        return u0, w0


class ProbeSpec(StrictModel):
    a: float = DEFAULT_EXPONENT
    b: float = DEFAULT_EXPONENT
    trials: int = Field(100, ge=1)
    powers: List[int] = [2, 3, 4]
    duhamel_horizons: List[float] = [0.05, 0.1, 0.2, 0.4]
    duhamel_trials: int = Field(20, ge=1)
    duhamel_tolerance: float = Field(0.25, gt=0)
    localization_R: float = Field(1.0, gt=0)
    embedding_b: float = 0.75
    embedding_trials: int = Field(50, ge=1)

    # Randomized probe resolution; the refined run doubles points and timesteps
    length: float = Field(ProbeGrid.length, gt=0)
    points: int = Field(ProbeGrid.points, ge=4)
    timesteps: int = Field(ProbeGrid.timesteps, ge=8)
    span: float = Field(ProbeGrid.span, gt=0)
    band_fraction: float = Field(ProbeGrid.band_fraction, gt=0, le=0.5)

    # Stochastic convolution moment probe
    convolution_paths: int = Field(200, ge=2)
    convolution_order: int = Field(1, ge=1)
    convolution_timesteps: int = Field(64, ge=4)
    convolution_span: float = Field(0.5, gt=0)
    convolution_tolerance: float = Field(0.25, gt=0)

    @field_validator("b", "a")
    def check_exponent(cls, value):
        if not (0 <= value < 0.5):
            raise ValueError(f"Probe exponents must lie in [0, 1/2), got {value}")
        return value

    def probe_grid(self) -> ProbeGrid:
        return ProbeGrid(self.length, self.points, self.timesteps, self.span, self.band_fraction)


class ContractionSpec(StrictModel):
    R: float = Field(2.0, gt=0)
    a: float = DEFAULT_EXPONENT
    b: float = DEFAULT_EXPONENT
    horizons: List[float] = [0.2, 0.1, 0.05]
    pairs: int = Field(20, ge=1)
    timesteps: int = Field(64, ge=4)
    perturbation: float = Field(0.1, gt=0)
    noise_mass: float = Field(0.01, ge=0)
    length: float = Field(16 * np.pi, gt=0)
    points: int = Field(128, ge=4)

    # log(factor) against log(T) is fitted over these horizons and compared with 1 - (a + b)
    slope_horizons: List[float] = [0.16, 0.08, 0.04, 0.02]
    tolerance: float = Field(0.25, gt=0)

    @field_validator("horizons", "slope_horizons")
    def check_horizons(cls, horizons):
        if len(horizons) < 2 or any(T <= 0 for T in horizons):
            raise ValueError(f"Need at least two positive horizons, got {horizons}")
        return sorted(horizons, reverse=True)

    @field_validator("a", "b")
    def check_exponent(cls, value):
        if not (0 < value < 0.5):
            raise ValueError(f"Exponents must lie in (0, 1/2), got {value}")
        return value

    def all_horizons(self) -> List[float]:
        return sorted(set(self.horizons) | set(self.slope_horizons), reverse=True)

    @property
    def expected_slope(self) -> float:
        return 1.0 - (self.a + self.b)


class CounterexampleSpec(StrictModel):
    ns: List[int] = [4, 8, 16, 32]
    r: float = Field(2.0, gt=0)
    q: float = Field(8.0, gt=0)
    tolerance: float = Field(0.05, gt=0)
    constancy_tolerance: float = Field(1e-10, gt=0)


class HierarchySpec(StrictModel):
    """Increasing values of each cutoff; the others stay at the run's ApproxParams"""

    K_values: List[float] = [0.5, 1.0, 2.0]
    n_values: List[float] = [8.0, 16.0, 32.0]
    m_values: List[float] = [8.0, 16.0, 32.0]
    floor: float = Field(1e-12, ge=0)

    @field_validator("K_values", "n_values", "m_values")
    def check_increasing(cls, values):
        if len(values) < 2:
            raise ValueError("Each hierarchy list needs at least two values")
        if any(v <= 0 for v in values) or any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError(f"Hierarchy values must be positive and increasing, got {values}")
        return values


class ConservationSpec(StrictModel):
    dts: List[float] = [1e-3, 5e-4, 2.5e-4]
    tolerance: float = Field(1e-6, gt=0)
    order_target: float = Field(2.0, gt=0)

    # Empirical Lyapunov constants c(K), reported only
    lyapunov_K: List[float] = [4.0, 16.0, 64.0]
    lyapunov_trials: int = Field(200, ge=1)

    @field_validator("dts")
    def check_dts(cls, dts):
        if len(dts) != 3 or any(b >= a for a, b in zip(dts, dts[1:])):
            raise ValueError(f"Need three decreasing time steps, got {dts}")
        if not math.isclose(dts[0] / dts[1], dts[1] / dts[2], rel_tol=1e-9):
            raise ValueError(f"The time steps must form a geometric ladder, got {dts}")
        return dts


class ExperimentConfig(StrictModel):
    scenario: Scenario = Scenario.SIMULATE
    grid: GridSpec = GridSpec()
    system: SystemParams = SystemParams()
    approx: ApproxParams = ApproxParams()
    scheme: SchemeConfig = SchemeConfig()
    hierarchy: Hierarchy = Hierarchy.FULL
    shifted: bool = False
    noise: NoiseSpec = NoiseSpec()
    initial: InitialDataSpec = InitialDataSpec()
    seed: int = Field(0, ge=0)
    paths: int = Field(1, ge=1)
    moment_order: int = Field(1, ge=1)
    checkpoints: List[float] = [0.2, 0.4, 0.6, 0.8, 1.0]
    track_norms: bool = False
    norm_exponent: float = DEFAULT_EXPONENT
    output_dir: Optional[Path] = None
    probe: ProbeSpec = ProbeSpec()
    contraction: ContractionSpec = ContractionSpec()
    counterexample: CounterexampleSpec = CounterexampleSpec()
    hierarchy_study: HierarchySpec = HierarchySpec()
    conservation: ConservationSpec = ConservationSpec()

    @model_validator(mode="after")
    def check_consistency(self) -> "ExperimentConfig":
        self.grid.build()
        if self.hierarchy in APPROXIMATIONS or self.scenario is Scenario.HIERARCHY:
            if self.system.alpha != 1 or self.system.f_choice is not FChoice.U:
                raise ValueError("The approximation hierarchies need alpha = 1 and f_choice = 'u'")
        if self.shifted and self.hierarchy not in SHIFTABLE:
            raise ValueError(f"The shifted form is not defined for hierarchy '{self.hierarchy.value}'")
        if self.hierarchy is Hierarchy.LOCALIZED and self.approx.R is None:
            raise ValueError("The localized hierarchy needs a finite R")
        if self.scenario is Scenario.HIERARCHY:
            study = self.hierarchy_study
            if min(study.n_values) < self.approx.m_bound:
                raise ValueError(f"n values {study.n_values} violate n >= m = {self.approx.m}")
            if max(study.m_values) > self.approx.n_bound:
                raise ValueError(f"m values {study.m_values} violate n = {self.approx.n} >= m")
        if any(t <= 0 for t in self.checkpoints):
            raise ValueError(f"Checkpoints must be positive, got {self.checkpoints}")
        self.checkpoints = sorted(self.checkpoints)
        return self

    def with_overrides(
        self,
        scenario: Optional[Scenario] = None,
        seed: Optional[int] = None,
        output_dir: Optional[Path] = None,
        paths: Optional[int] = None,
        dt: Optional[float] = None,
        T0: Optional[float] = None,
    ) -> "ExperimentConfig":
        """A validated copy with command-line overrides applied"""
        data: Dict[str, Any] = self.model_dump(mode="json")
        for key, value in (("scenario", scenario), ("seed", seed), ("output_dir", output_dir), ("paths", paths)):
            if value is not None:
                data[key] = value.value if isinstance(value, Enum) else str(value) if isinstance(value, Path) else value
        for key, value in (("dt", dt), ("T0", T0)):
            if value is not None:
                data["scheme"][key] = value
        return ExperimentConfig.model_validate(data)

    def checkpoint_steps(self) -> List[Tuple[float, int]]:
        """(t, step index) of every checkpoint within the horizon, t = 0 first"""
        steps = self.scheme.steps
        marks = [(0.0, 0)]
        for t in self.checkpoints:
            index = int(round(t / self.scheme.dt))
            if 0 < index <= steps and index != marks[-1][1]:
                marks.append((index * self.scheme.dt, index))
        return marks


def load_config(source: Union[str, Path]) -> ExperimentConfig:
    """Read and validate a JSON config; pydantic's ValidationError reports unknown keys"""
    return ExperimentConfig.model_validate_json(Path(source).read_text(encoding="utf-8"))


def scheme_for(cfg: ExperimentConfig, dt: float, scheme: Optional[Scheme] = None) -> SchemeConfig:
    return cfg.scheme.model_copy(update={"dt": dt, "scheme": scheme or cfg.scheme.scheme})
