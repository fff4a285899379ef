"""
One runner per scenario
Every runner takes a validated ExperimentConfig and a worker count and returns a RunResult
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from harness.config import ExperimentConfig, Scenario, scheme_for
from harness.ensemble import (
    DiagnosticsRow,
    EnsembleContext,
    diagnostics_row,
    run_ensemble,
    run_hierarchy_convergence,
    run_paths,
)
from skdv.bourgain import (
    ProbeReport,
    SlopeReport,
    counterexample_norms,
    counterexample_slope,
    fit_slope,
    probe_basic_inequality,
    probe_bilinear_kdv,
    probe_bilinear_schrodinger,
    probe_duhamel_gain,
    probe_embedding,
    probe_localization,
    probe_power,
    probe_trilinear,
    restricted_norm,
    x_weight,
)
from skdv.cutoffs import TruncationFamily
from skdv.functionals import estimate_lyapunov_constant
from skdv.dynamics import Hierarchy, NoiseModel, Scheme, State, contraction_factor, initial_state, integrate
from skdv.errors import InvalidArgumentError
from skdv.noise import (
    Channel,
    NoiseStream,
    apply_f_choice,
    build_noise_operator,
    gaussian_kernel,
    noise_field,
    sample_increment,
    zero_kernel,
)
from skdv.spectral_core import ComplexField, Grid1D, Propagator, SpaceTimeField, sobolev_norm, stochastic_integral
from skdv.utils.log import logger

BASIC_INEQUALITY_TARGET = 4.0
BASIC_INEQUALITY_TOLERANCE = 1e-6
CONTRACTION_KEY = 0xC0
PERTURBATION_WAVENUMBER = 1.5


@dataclass
class RunResult:
    """Everything emit_outputs writes for one run"""

    scenario: Scenario
    rows: List[DiagnosticsRow] = field(default_factory=list)
    curves: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    reports: List[BaseModel] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    verdicts: Dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())


######################################################
## Simulation and ensembles
######################################################


def run_simulation(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    """Step the configured paths and record diagnostics, without statistics"""
    context = EnsembleContext.build(cfg)
    results = run_paths(context, range(cfg.paths), threads)
    blown_up = sum(result.blowup for result in results)
    return RunResult(
        scenario=Scenario.SIMULATE,
        rows=[row for result in results for row in result.rows],
        summary={
            "paths": cfg.paths,
            "steps": cfg.scheme.steps,
            "blown_up": blown_up,
            "messages": {str(result.path_id): result.message for result in results if result.message},
        },
        verdicts={"no_blowup": blown_up == 0},
    )


def run_ensemble_scenario(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    outcome = run_ensemble(cfg, threads)
    summary: Dict[str, Any] = {
        "paths": outcome.paths,
        "blown_up": outcome.blown_up,
        "moment_order": outcome.moments.order,
        "checkpoints": outcome.moments.times.tolist(),
        "moment_estimates": outcome.moments.estimates.tolist(),
        "moment_standard_errors": outcome.moments.standard_errors.tolist(),
        "mass_estimates": outcome.masses.estimates.tolist(),
    }
    if outcome.predicted_masses is not None:
        summary["mass_predicted"] = outcome.predicted_masses.tolist()
    return RunResult(
        scenario=Scenario.ENSEMBLE, rows=outcome.rows, curves=outcome.curves, summary=summary, verdicts=outcome.verdicts
    )


def run_hierarchy(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    outcome = run_hierarchy_convergence(cfg, threads)
    return RunResult(
        scenario=Scenario.HIERARCHY,
        curves={"hierarchy": outcome.table},
        summary={"paths": outcome.paths, "blown_up": outcome.blown_up, "table": outcome.table},
        verdicts=outcome.verdicts,
    )


######################################################
## Deterministic conservation
######################################################


def _relative_drift(values: List[float]) -> float:
    reference = values[0]
    spread = max(abs(value - reference) for value in values)
    return spread / abs(reference) if reference != 0 else spread


def _order(coarse_gap: float, fine_gap: float, ratio: float) -> float:
    return math.inf if fine_gap == 0 else math.log(coarse_gap / fine_gap) / math.log(ratio)


def richardson_order(finals: Sequence[State], ratio: float) -> Tuple[float, float]:
    """
    Self-convergence order of three final states computed at steps dt, dt/ratio, dt/ratio^2,
    with the spread of the per-component orders around it as the error estimate
    """
    if len(finals) != 3 or ratio <= 1:
        raise InvalidArgumentError(f"Need three final states and a step ratio > 1, got {len(finals)} and {ratio}")
    coarse, middle, fine = finals
    u_gaps = ((coarse.u - middle.u).l2_norm(), (middle.u - fine.u).l2_norm())
    w_gaps = ((coarse.w - middle.w).l2_norm(), (middle.w - fine.w).l2_norm())
    order = _order(u_gaps[0] + w_gaps[0], u_gaps[1] + w_gaps[1], ratio)
    if not math.isfinite(order):
        return order, 0.0
    components = [_order(*gaps, ratio) for gaps in (u_gaps, w_gaps) if min(gaps) > 0]
    error = max((abs(value - order) for value in components), default=0.0)
    return order, error


def run_conservation(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    """
    Noise-off mnK runs with Strang/RK4 at three time steps: relative drift of mass,
    momentum and energy, plus the self-convergence order of the final state
    """
    study = cfg.conservation
    grid = cfg.grid.build()
    u0, w0 = cfg.initial.build(grid)
    family = TruncationFamily(cfg.approx.K)
    rows: List[DiagnosticsRow] = []
    curves: Dict[str, List[Dict[str, Any]]] = {}
    drifts: Dict[str, List[float]] = {"mass": [], "momentum": [], "energy": []}
    finals: List[State] = []
    for index, dt in enumerate(study.dts):
        scheme = scheme_for(cfg, dt, Scheme.STRANG_RK4)
        collected: List[DiagnosticsRow] = []

        def hook(state: State, _localizer) -> None:
            collected.append(diagnostics_row(index, state, family, None))

        trajectory = integrate(
            initial_state(u0, w0, Hierarchy.MNK, cfg.approx),
            cfg.system,
            scheme,
            hierarchy=Hierarchy.MNK,
            approx=cfg.approx,
            hook=hook,
            record_every=scheme.steps,
        )
        finals.append(trajectory.final)
        rows.extend(collected)
        for name in drifts:
            drifts[name].append(_relative_drift([getattr(row, name) for row in collected]))
        curves[f"conservation_dt{index}"] = [
            {"t": row.t, "mass": row.mass, "momentum": row.momentum, "energy": row.energy} for row in collected
        ]
        logger.info(f"dt={dt:.2e}: drifts " + ", ".join(f"{name}={values[-1]:.2e}" for name, values in drifts.items()))

    order, order_error = richardson_order(finals, study.dts[0] / study.dts[1])
    verdicts = {f"{name}_drift": values[-1] < study.tolerance for name, values in drifts.items()}
    verdicts["richardson_order"] = order + order_error >= study.order_target
    drift_orders = {
        name: fit_slope(study.dts, values) if min(values) > 0 else math.inf for name, values in drifts.items()
    }
    lyapunov = [estimate_lyapunov_constant(grid, K, study.lyapunov_trials, cfg.seed) for K in study.lyapunov_K]
    curves["lyapunov"] = [{"K": item.K, "constant": item.constant, "trials": item.trials} for item in lyapunov]
    return RunResult(
        scenario=Scenario.CONSERVE,
        rows=rows,
        curves=curves,
        summary={
            "dts": study.dts,
            "drifts": drifts,
            "drift_orders": drift_orders,
            "richardson_order": order,
            "richardson_order_error": order_error,
            "lyapunov_constants": {str(item.K): item.constant for item in lyapunov},
        },
        verdicts=verdicts,
    )


######################################################
## Bourgain-space probes
######################################################


class StochasticConvolutionReport(BaseModel):
    """Monte Carlo moment of the stochastic convolution against its deterministic bound"""

    lemma: str = "stochastic_convolution"
    exponents: Dict[str, float]
    paths: int
    estimate: float = Field(ge=0)
    half_estimate: float = Field(ge=0)
    reference: float = Field(ge=0)
    ratio: float = Field(ge=0)
    half_ratio: float = Field(ge=0)
    finite: bool
    m_stable: bool


def _relative_gap(first: float, second: float) -> float:
    scale = max(abs(first), abs(second))
    return 0.0 if scale == 0 else abs(first - second) / scale


def run_stochastic_convolution_probe(cfg: ExperimentConfig) -> StochasticConvolutionReport:
    """
    E |int_0^t S(t-r) F(u)^alpha Phi dW|^{2l}_{X^T_{b,1}} for the frozen free wave u = S(t)u0,
    against |k1|^{2l}_{H1} |F(u)^alpha|^{2l}_{X^T_{0,1}}
    """
    probe = cfg.probe
    b, order, alpha = probe.b, probe.convolution_order, cfg.system.alpha
    if b >= 0.5:
        raise InvalidArgumentError(f"The stochastic convolution probe needs b < 1/2, got {b}")
    grid = Grid1D(probe.length, probe.points)
    timesteps, T = probe.convolution_timesteps, probe.convolution_span
    dt = T / timesteps
    u0, _ = cfg.initial.build(grid)
    times = dt * np.arange(timesteps)
    free = np.fft.ifft(Propagator.SCHRODINGER.multipliers(grid, times) * np.fft.fft(u0.values)[None, :], axis=1)
    u = SpaceTimeField(grid, dt, free)
    forcing = apply_f_choice(u.values, cfg.system.f_choice) ** alpha
    kernel = cfg.noise.phi.build(grid) if cfg.noise.enabled else zero_kernel(grid)
    phi = build_noise_operator(kernel, min(cfg.noise.basis_size, grid.points), "phi")
    weight = x_weight(b)

    samples = np.zeros(probe.convolution_paths)
    for path_id in range(probe.convolution_paths):
        stream = NoiseStream(cfg.seed, path_id, Channel.SCHRODINGER)
        xi = np.stack(
            [noise_field(phi, sample_increment(stream, dt, phi.basis_size, k)).values for k in range(timesteps)]
        )
        Z = stochastic_integral(u.with_values(forcing * xi), Propagator.SCHRODINGER)
        samples[path_id] = restricted_norm(Z, T, weight) ** (2 * order)

    reference = sobolev_norm(kernel, 1.0) ** (2 * order) * restricted_norm(u.with_values(forcing), T, x_weight(0.0)) ** (
        2 * order
    )
    estimate = float(samples.mean())
    half_estimate = float(samples[: probe.convolution_paths // 2].mean())
    ratio = estimate / reference if reference > 0 else 0.0
    half_ratio = half_estimate / reference if reference > 0 else 0.0
    m_stable = _relative_gap(half_ratio, ratio) <= probe.convolution_tolerance
    logger.info(f"Stochastic convolution ratio {ratio:.4g} over {probe.convolution_paths} paths (half: {half_ratio:.4g})")
    return StochasticConvolutionReport(
        exponents={"b": b, "alpha": alpha, "l": order},
        paths=probe.convolution_paths,
        estimate=estimate,
        half_estimate=half_estimate,
        reference=reference,
        ratio=ratio,
        half_ratio=half_ratio,
        finite=bool(math.isfinite(ratio)),
        m_stable=m_stable,
    )


def run_probes(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    """Every randomized estimate probe, the Duhamel gain fit and the stochastic convolution moment"""
    probe = cfg.probe
    grid = probe.probe_grid()
    seed = cfg.seed
    spot = probe_basic_inequality(0.375, 0.375, 0.0, 0.0)
    reports: List[BaseModel] = [
        probe_bilinear_schrodinger(probe.a, probe.b, probe.trials, seed, grid),
        probe_trilinear(probe.a, probe.b, probe.trials, seed, grid),
        probe_bilinear_kdv(probe.a, probe.b, False, probe.trials, seed, grid),
        probe_bilinear_kdv(probe.a, probe.b, True, probe.trials, seed, grid),
        *[probe_power(alpha, probe.b, probe.trials, seed, grid) for alpha in probe.powers],
        *probe_localization(probe.localization_R, probe.b, probe.trials, seed, grid),
        probe_embedding(probe.embedding_b, probe.embedding_trials, seed, grid),
        probe_duhamel_gain(
            probe.a,
            probe.b,
            probe.duhamel_horizons,
            probe.duhamel_trials,
            seed,
            tolerance=probe.duhamel_tolerance,
        ),
    ]
    convolution = run_stochastic_convolution_probe(cfg)
    reports.append(convolution)

    verdicts = {"basic_inequality": abs(spot - BASIC_INEQUALITY_TARGET) <= BASIC_INEQUALITY_TOLERANCE}
    for report in reports:
        if isinstance(report, ProbeReport):
            verdicts[f"{report.lemma}_stable"] = report.stable
        elif isinstance(report, SlopeReport):
            verdicts[f"{report.lemma}_slope"] = report.within_tolerance
    verdicts["stochastic_convolution_finite"] = convolution.finite
    verdicts["stochastic_convolution_m_stable"] = convolution.m_stable
    return RunResult(
        scenario=Scenario.PROBE,
        reports=reports,
        summary={"basic_inequality": spot},
        verdicts=verdicts,
    )


######################################################
## Picard contraction
######################################################


def _band_limited(grid: Grid1D, rng: np.random.Generator, real: bool) -> np.ndarray:
    """Random profile on |xi| <= PERTURBATION_WAVENUMBER with unit H1 norm"""
    band = np.abs(grid.wavenumbers) <= PERTURBATION_WAVENUMBER
    coefficients = (rng.standard_normal(grid.points) + 1j * rng.standard_normal(grid.points)) * band
    values = np.fft.ifft(coefficients)
    values = values.real if real else values
    norm = sobolev_norm(ComplexField(grid, values), 1.0)
    return values / norm if norm > 0 else values


def _random_pair(
    grid: Grid1D, times: np.ndarray, u0: ComplexField, rng: np.random.Generator, size: float
) -> "tuple[SpaceTimeField, SpaceTimeField]":
    """u = S(t)(u0 + size g), v = (t/T) U(t)(size h): smooth in time, v(0) = 0"""
    dt = times[1] - times[0]
    span = dt * times.size
    g = u0.values + size * _band_limited(grid, rng, real=False)
    h = size * _band_limited(grid, rng, real=True)
    u = np.fft.ifft(Propagator.SCHRODINGER.multipliers(grid, times) * np.fft.fft(g)[None, :], axis=1)
    v = np.fft.ifft(Propagator.AIRY.multipliers(grid, times) * np.fft.fft(h)[None, :], axis=1).real
    v = v * (times / span)[:, None]
    return SpaceTimeField(grid, dt, u), SpaceTimeField(grid, dt, v)


def run_contraction(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    """
    Contraction factor of the localized Picard map over random pairs at each horizon;
    pair k uses the same random profiles at every horizon.
    The factor is bounded by C T^(1 - (a + b)), so the fitted slope must not fall below that rate
    by more than the tolerance; the two-sided match is reported in the slope report
    """
    study = cfg.contraction
    grid = Grid1D(study.length, study.points)
    u0, w0 = cfg.initial.build(grid)
    basis_size = min(cfg.noise.basis_size, grid.points)
    operator = build_noise_operator(gaussian_kernel(grid, study.noise_mass), basis_size, "phi")
    curve: List[Dict[str, Any]] = []
    means: Dict[float, float] = {}
    worst: Dict[float, float] = {}
    for T in study.all_horizons():
        dt = T / study.timesteps
        times = dt * np.arange(study.timesteps)
        noise_path = None
        if cfg.noise.enabled and study.noise_mass > 0:
            noise_path = NoiseModel(operator, operator, cfg.seed).path(study.timesteps, dt)
        factors = []
        for k in range(study.pairs):
            rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(CONTRACTION_KEY, k)))
            first = _random_pair(grid, times, u0, rng, study.perturbation)
            second = _random_pair(grid, times, u0, rng, study.perturbation)
            factors.append(
                contraction_factor(first, second, u0, w0, study.R, cfg.system, noise_path, study.b, cfg.scheme.dealias)
            )
            curve.append({"T": T, "pair": k, "factor": factors[-1]})
        means[T] = float(np.mean(factors))
        worst[T] = float(np.max(factors))
        logger.info(f"T={T:.3g}: mean contraction factor {means[T]:.4g}, max {worst[T]:.4g}")
    slope_values = [means[T] for T in study.slope_horizons]
    slope = fit_slope(study.slope_horizons, slope_values)
    expected = study.expected_slope
    report = SlopeReport(
        lemma="contraction",
        exponents={"R": study.R, "a": study.a, "b": study.b},
        trials=study.pairs,
        abscissae=list(study.slope_horizons),
        values=slope_values,
        slope=slope,
        expected_slope=expected,
        tolerance=study.tolerance,
        within_tolerance=abs(slope - expected) <= study.tolerance,
    )
    if not report.within_tolerance:
        logger.warning(f"Contraction slope {slope:.3f} decays faster than the bound rate {expected:.3f}")
    ladder = [means[T] for T in study.horizons]
    verdicts = {
        "contraction_below_one": worst[study.horizons[-1]] < 1.0,
        "contraction_monotone": all(later <= earlier for earlier, later in zip(ladder, ladder[1:])),
        "contraction_slope": slope >= expected - study.tolerance,
    }
    return RunResult(
        scenario=Scenario.CONTRACTION,
        curves={"contraction": curve},
        reports=[report],
        summary={
            "horizons": study.all_horizons(),
            "mean_factors": [means[T] for T in study.all_horizons()],
            "max_factors": [worst[T] for T in study.all_horizons()],
            "slope": slope,
            "expected_slope": expected,
            "slope_within_tolerance": report.within_tolerance,
        },
        verdicts=verdicts,
    )


######################################################
## Mixed-norm counterexample
######################################################


def run_counterexample(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    study = cfg.counterexample
    norms = [counterexample_norms(n, study.r, study.q) for n in study.ns]
    report = counterexample_slope(study.ns, study.r, study.q, study.tolerance)
    sup_values = [item.sup_h1 for item in norms]
    spread = (max(sup_values) - min(sup_values)) / max(sup_values)
    return RunResult(
        scenario=Scenario.COUNTEREXAMPLE,
        curves={"counterexample": [{"n": item.n, "sup_h1": item.sup_h1, "mixed": item.mixed} for item in norms]},
        reports=[report],
        summary={"sup_h1_spread": spread, "slope": report.slope},
        verdicts={"sup_h1_constant": spread <= study.constancy_tolerance, "counterexample_slope": report.within_tolerance},
    )
