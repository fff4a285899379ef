"""
Path tasks and ensemble orchestration
Paths run on a thread pool and are merged in path_id order, so outputs never
depend on scheduling or on the number of workers
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from functools import partial
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from harness.config import ExperimentConfig
from skdv.cutoffs import TruncationFamily
from skdv.dynamics import (
    ApproxParams,
    Hierarchy,
    Localizer,
    NoiseModel,
    State,
    initial_state,
    integrate,
)
from skdv.errors import BlowUpError
from skdv.functionals import MomentSeries, energy, h1_pair_norm_sq, mass, mass_drift_oracle, momentum
from skdv.noise import FChoice, NoiseOperator, diffusion_intensity
from skdv.spectral_core import HOMOGENEOUS_EXPONENT, ComplexField, Grid1D, RealField, sobolev_norm
from skdv.utils.log import logger

BLOWUP_FRACTION_LIMIT = 0.1
M_STABILITY_TOLERANCE = 0.25
ORACLE_STANDARD_ERRORS = 3.0


@dataclass(frozen=True)
class DiagnosticsRow:
    """One row per (path, step); a blow-up marker row carries only path_id, t and the flag"""

    path_id: int
    t: float
    mass: Optional[float] = None
    momentum: Optional[float] = None
    energy: Optional[float] = None
    u_h1: Optional[float] = None
    w_h1: Optional[float] = None
    w_hdot_m38: Optional[float] = None
    x_norm: Optional[float] = None
    y_norm: Optional[float] = None
    sigma1_hit: bool = False
    sigma2_hit: bool = False
    blowup: bool = False


COLUMNS: Tuple[str, ...] = tuple(item.name for item in fields(DiagnosticsRow))


def diagnostics_row(path_id: int, state: State, family: TruncationFamily, localizer: Optional[Localizer]) -> DiagnosticsRow:
    x_norm = y_norm = None
    sigma1_hit = sigma2_hit = False
    if localizer is not None and localizer.tracker.x_norms:
        tracker = localizer.tracker
        x_norm, y_norm = tracker.x_norms[-1], tracker.y_norms[-1]
        sigma1_hit = tracker.sigma1 is not None and tracker.sigma1 <= state.t
        sigma2_hit = tracker.sigma2 is not None and tracker.sigma2 <= state.t
    return DiagnosticsRow(
        path_id=path_id,
        t=state.t,
        mass=mass(state.u),
        momentum=momentum(state.u, state.w),
        energy=energy(state.u, state.w, family),
        u_h1=sobolev_norm(state.u, 1.0),
        w_h1=sobolev_norm(state.w, 1.0),
        w_hdot_m38=sobolev_norm(state.w, 0.0, HOMOGENEOUS_EXPONENT),
        x_norm=x_norm,
        y_norm=y_norm,
        sigma1_hit=sigma1_hit,
        sigma2_hit=sigma2_hit,
    )


@dataclass(frozen=True)
class EnsembleContext:
    """Everything the path tasks share; built once per run"""

    cfg: ExperimentConfig
    grid: Grid1D
    u0: ComplexField
    w0: RealField
    operators: Optional[Tuple[NoiseOperator, NoiseOperator]]

    @classmethod
    def build(cls, cfg: ExperimentConfig) -> "EnsembleContext":
        grid = cfg.grid.build()
        u0, w0 = cfg.initial.build(grid)
        operators = cfg.noise.operators(grid) if cfg.noise.enabled else None
        return cls(cfg=cfg, grid=grid, u0=u0, w0=w0, operators=operators)

    def noise_model(self, path_id: int) -> Optional[NoiseModel]:
        if self.operators is None:
            return None
        phi, psi = self.operators
        return NoiseModel(phi=phi, psi=psi, master_seed=self.cfg.seed, path_id=path_id)


@dataclass
class PathResult:
    path_id: int
    rows: List[DiagnosticsRow] = field(default_factory=list)
    # sup_{s<=t} |(u,w)(s)|^2_{H1 x H1} and |u(t)|^2 at each checkpoint reached
    sup_norms: List[float] = field(default_factory=list)
    masses: List[float] = field(default_factory=list)
    # (u, w) samples of every step, kept only when requested
    samples: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    blowup: bool = False
    message: Optional[str] = None


def run_path(
    context: EnsembleContext,
    path_id: int,
    hierarchy: Optional[Hierarchy] = None,
    approx: Optional[ApproxParams] = None,
    keep_samples: bool = False,
) -> PathResult:
    """Step one path to T0 and collect its diagnostics; a blow-up ends the path with a marker row"""
    cfg = context.cfg
    hierarchy = cfg.hierarchy if hierarchy is None else hierarchy
    approx = cfg.approx if approx is None else approx
    family = TruncationFamily(approx.K if hierarchy is Hierarchy.MNK else None)
    localizer = None
    if cfg.track_norms or hierarchy is Hierarchy.LOCALIZED:
        localizer = Localizer(R=approx.R_bound, w0=context.w0, b=cfg.norm_exponent)
    marks = {index for _, index in cfg.checkpoint_steps()}
    result = PathResult(path_id=path_id)
    running = [0.0]

    def hook(state: State, loc: Optional[Localizer]) -> None:
        result.rows.append(diagnostics_row(path_id, state, family, loc))
        running[0] = max(running[0], h1_pair_norm_sq(state.u, state.w))
        if state.step_index in marks:
            result.sup_norms.append(running[0])
            result.masses.append(mass(state.u))
        if keep_samples:
            result.samples.append((state.u.values, state.w.values))

    initial = initial_state(context.u0, context.w0, hierarchy, approx)
    try:
        integrate(
            initial,
            cfg.system,
            cfg.scheme,
            noise_model=context.noise_model(path_id),
            hierarchy=hierarchy,
            approx=approx,
            localizer=localizer,
            shifted=cfg.shifted,
            w0=context.w0,
            hook=hook,
            record_every=cfg.scheme.steps + 1,
        )
    except BlowUpError as exc:
        logger.warning(f"Path {path_id} blew up: {exc}")
        result.rows.append(DiagnosticsRow(path_id=path_id, t=exc.step_index * cfg.scheme.dt, blowup=True))
        result.blowup = True
        result.message = str(exc)
    return result


def run_paths(
    context: EnsembleContext, path_ids: Sequence[int], threads: int = 1, **kwargs
) -> List[PathResult]:
    """Run path tasks concurrently; results come back in path_id order"""
    task = partial(run_path, context, **kwargs)
    if threads <= 1:
        results = [task(path_id) for path_id in path_ids]
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(task, path_ids))
    return sorted(results, key=lambda item: item.path_id)


@dataclass
class EnsembleOutcome:
    rows: List[DiagnosticsRow]
    moments: MomentSeries
    masses: MomentSeries
    predicted_masses: Optional[np.ndarray]
    blown_up: int
    paths: int
    verdicts: Dict[str, bool]
    half_moments: Optional[MomentSeries] = None

    @property
    def curves(self) -> Dict[str, List[Dict[str, float]]]:
        moment_curve = []
        for i, t in enumerate(self.moments.times):
            entry = {"t": float(t), "estimate": float(self.moments.estimates[i]), "standard_error": float(self.moments.standard_errors[i])}
            if self.half_moments is not None:
                entry["half_estimate"] = float(self.half_moments.estimates[i])
            moment_curve.append(entry)
        mass_curve = []
        for i, t in enumerate(self.masses.times):
            entry = {"t": float(t), "estimate": float(self.masses.estimates[i]), "standard_error": float(self.masses.standard_errors[i])}
            if self.predicted_masses is not None:
                entry["predicted"] = float(self.predicted_masses[i])
            mass_curve.append(entry)
        return {"moments": moment_curve, "mass": mass_curve}


def _relative_gap(first: float, second: float) -> float:
    scale = max(abs(first), abs(second))
    return 0.0 if scale == 0 else abs(first - second) / scale


def run_ensemble(cfg: ExperimentConfig, threads: int = 1) -> EnsembleOutcome:
    """
    M independent paths to T0 with moment estimates of E sup_{s<=t} |(u,w)|^{2l} at every checkpoint,
    compared against the Ito mass-drift law when alpha = 1 and F(u) = u
    """
    context = EnsembleContext.build(cfg)
    logger.info(f"Running {cfg.paths} path(s) to T0={cfg.scheme.T0} with dt={cfg.scheme.dt} on {threads} thread(s)")
    results = run_paths(context, range(cfg.paths), threads)
    rows = [row for result in results for row in result.rows]
    survivors = [result for result in results if not result.blowup]
    blown_up = len(results) - len(survivors)
    times = [t for t, _ in cfg.checkpoint_steps()]
    order = cfg.moment_order

    sup = np.array([result.sup_norms for result in survivors]).reshape(len(survivors), len(times))
    masses_sampled = np.array([result.masses for result in survivors]).reshape(len(survivors), len(times))
    moments = MomentSeries.from_samples(times, sup**order, order)
    masses = MomentSeries.from_samples(times, masses_sampled, 1)

    verdicts: Dict[str, bool] = {"blowup_fraction": blown_up <= BLOWUP_FRACTION_LIMIT * cfg.paths}
    verdicts["moments_finite"] = bool(np.all(np.isfinite(moments.estimates)))

    half_moments = None
    if len(survivors) >= 4:
        half_moments = MomentSeries.from_samples(times, sup[: len(survivors) // 2] ** order, order)
        gap = _relative_gap(half_moments.estimates[-1], moments.estimates[-1])
        verdicts["moments_m_stable"] = gap <= M_STABILITY_TOLERANCE
        logger.info(f"Moment estimate at t={times[-1]:.4g}: {moments.estimates[-1]:.6g} (half ensemble gap {gap:.2%})")

    predicted = None
    if (
        context.operators is not None
        and cfg.system.alpha == 1
        and cfg.system.f_choice is FChoice.U
        and cfg.hierarchy is Hierarchy.FULL
        and masses.paths >= 2
    ):
        predicted = mass_drift_oracle(mass(context.u0), diffusion_intensity(context.operators[0]), times)
        deviation = np.abs(masses.estimates - predicted)
        verdicts["mass_drift_oracle"] = bool(
            np.all(deviation <= ORACLE_STANDARD_ERRORS * masses.standard_errors + 1e-12 * predicted)
        )

    if blown_up:
        logger.warning(f"{blown_up} of {cfg.paths} paths blew up")
    for name, passed in verdicts.items():
        if not passed:
            logger.warning(f"Verdict {name} failed")
    return EnsembleOutcome(
        rows=rows,
        moments=moments,
        masses=masses,
        predicted_masses=predicted,
        blown_up=blown_up,
        paths=cfg.paths,
        verdicts=verdicts,
        half_moments=half_moments,
    )


# -- Hierarchy convergence -------------------------------------------------------------------------------------------


HIERARCHY_LEVELS: Dict[str, Hierarchy] = {"K": Hierarchy.MNK, "n": Hierarchy.MN, "m": Hierarchy.M}


def _level_params(base: ApproxParams, parameter: str, value: Optional[float]) -> ApproxParams:
    if parameter == "K":
        return ApproxParams(m=base.m, n=base.n, K=value)
    if parameter == "n":
        return ApproxParams(m=base.m, n=value)
    return ApproxParams(m=value)


def _sup_difference(first: PathResult, second: PathResult, grid: Grid1D) -> float:
    """sup_t |u_a - u_b|^2_{H1} + |w_a - w_b|^2_{H1} over the common steps"""
    worst = 0.0
    for (ua, wa), (ub, wb) in zip(first.samples, second.samples):
        gap = h1_pair_norm_sq(ComplexField(grid, ua - ub), RealField(grid, wa - wb))
        worst = max(worst, gap)
    return worst


@dataclass
class HierarchyOutcome:
    table: List[Dict[str, Any]]
    verdicts: Dict[str, bool]
    blown_up: int
    paths: int


def _compare_path(context: EnsembleContext, parameter: str, values: Sequence[Optional[float]], path_id: int) -> Optional[List[float]]:
    level = HIERARCHY_LEVELS[parameter]
    runs = [
        run_path(context, path_id, level, _level_params(context.cfg.approx, parameter, value), keep_samples=True)
        for value in values
    ]
    if any(run.blowup for run in runs):
        return None
    return [_sup_difference(a, b, context.grid) for a, b in zip(runs, runs[1:])]


def run_hierarchy_convergence(cfg: ExperimentConfig, threads: int = 1) -> HierarchyOutcome:
    """
    Pathwise differences between consecutive cutoff values of K (level mnK), n (level mn)
    and m (level m), each path reusing its noise across values; the last entry compares
    against the infinite cutoff
    """
    context = EnsembleContext.build(cfg)
    study = cfg.hierarchy_study
    table: List[Dict[str, Any]] = []
    verdicts: Dict[str, bool] = {}
    blown_up = 0
    for parameter, listed in (("K", study.K_values), ("n", study.n_values), ("m", study.m_values)):
        values: List[Optional[float]] = [*listed, None]
        task = partial(_compare_path, context, parameter, values)
        if threads <= 1:
            per_path = [task(path_id) for path_id in range(cfg.paths)]
        else:
            with ThreadPoolExecutor(max_workers=threads) as executor:
                per_path = list(executor.map(task, range(cfg.paths)))
        usable = np.array([item for item in per_path if item is not None]).reshape(-1, len(values) - 1)
        blown_up += len(per_path) - usable.shape[0]
        summary = MomentSeries.from_samples(range(len(values) - 1), usable, 1)
        for i in range(len(values) - 1):
            upper = values[i + 1]
            table.append(
                {
                    "parameter": parameter,
                    "value": float(values[i]),
                    "next_value": math.inf if upper is None else float(upper),
                    "mean_difference": float(summary.estimates[i]),
                    "standard_error": float(summary.standard_errors[i]),
                }
            )
        listed_means = summary.estimates[: len(listed) - 1]
        verdicts[f"{parameter}_nonincreasing"] = bool(
            usable.shape[0] > 0 and np.all(np.diff(listed_means) <= study.floor)
        )
        logger.info(f"Hierarchy {parameter}: differences {np.array2string(summary.estimates, precision=3)}")
    verdicts["blowup_fraction"] = blown_up <= BLOWUP_FRACTION_LIMIT * 3 * cfg.paths
    return HierarchyOutcome(table=table, verdicts=verdicts, blown_up=blown_up, paths=cfg.paths)
