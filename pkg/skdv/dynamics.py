"""
Stochastic Schrodinger-KdV Dynamics
Time integrators for the full, norm-localized and approximation systems, the Picard
map of the fixed-point argument and stopping-time tracking
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from skdv.bourgain import (
    DEFAULT_EXPONENT,
    restricted_norm,
    running_norm,
    running_tilde_y_norm,
    tilde_y_norm,
    x_weight,
)
from skdv.cutoffs import TruncationFamily, localize_by_norm, theta_R
from skdv.errors import BlowUpError, InvalidArgumentError, PreconditionError
from skdv.noise import (
    Channel,
    FChoice,
    NoiseOperator,
    NoiseStream,
    WienerIncrement,
    apply_f_choice,
    noise_field,
    noise_term_kdv,
    noise_term_schrodinger,
    sample_increment,
)
from skdv.spectral_core import (
    DUHAMEL_TOLERANCE,
    ComplexField,
    Grid1D,
    Propagator,
    RealField,
    SpaceTimeField,
    airy_propagate,
    check_same_grid,
    duhamel_integral,
    project_low,
    sobolev_norm,
    stochastic_integral,
)
from skdv.utils.log import logger

BLOWUP_THRESHOLD = 1e8


class SystemParams(BaseModel):
    """Coefficients of the system; gamma1 * gamma2 > 0 unless both couplings are switched off"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: int = Field(1, ge=1)
    beta: float = 1.0
    gamma1: float = 1.0
    gamma2: float = 1.0
    f_choice: FChoice = FChoice.U

    @model_validator(mode="after")
    def check_coupling(self) -> "SystemParams":
        if self.gamma1 * self.gamma2 > 0 or (self.gamma1 == 0 and self.gamma2 == 0):
            return self
        raise ValueError(f"gamma1 * gamma2 must be positive, got {self.gamma1} * {self.gamma2}")


class ApproxParams(BaseModel):
    """Cutoffs of the approximation hierarchy; None stands for an infinite level"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    m: Optional[float] = Field(None, gt=0)
    n: Optional[float] = Field(None, gt=0)
    K: Optional[float] = Field(None, gt=0)
    R: Optional[float] = Field(None, ge=0)

    @model_validator(mode="after")
    def check_order(self) -> "ApproxParams":
        if self.n_bound < self.m_bound:
            raise ValueError(f"The nonlinearity cutoff n must be >= the noise cutoff m, got n={self.n}, m={self.m}")
        return self

    @property
    def m_bound(self) -> float:
        return math.inf if self.m is None else self.m

    @property
    def n_bound(self) -> float:
        return math.inf if self.n is None else self.n

    @property
    def R_bound(self) -> float:
        return math.inf if self.R is None else self.R


class Scheme(str, Enum):
    EXPONENTIAL_EULER = "exponential_euler_maruyama"
    STRANG_RK4 = "strang_rk4"


class SchemeConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float = Field(1e-3, gt=0)
    scheme: Scheme = Scheme.EXPONENTIAL_EULER
    T0: float = Field(1.0, gt=0)
    dealias: bool = False
    blowup_threshold: float = Field(BLOWUP_THRESHOLD, gt=0)

    @model_validator(mode="after")
    def check_horizon(self) -> "SchemeConfig":
        if self.T0 < self.dt:
            raise ValueError(f"Horizon T0={self.T0} is shorter than one step dt={self.dt}")
        return self

    @property
    def steps(self) -> int:
        return int(round(self.T0 / self.dt))


class Hierarchy(str, Enum):
    FULL = "full"
    LOCALIZED = "localized"
    MNK = "mnK"
    MN = "mn"
    M = "m"


APPROXIMATIONS = (Hierarchy.MNK, Hierarchy.MN, Hierarchy.M)
SHIFTABLE = (Hierarchy.FULL, Hierarchy.M, Hierarchy.LOCALIZED)


@dataclass(frozen=True)
class State:
    u: ComplexField
    w: RealField
    t: float = 0.0
    step_index: int = 0

    def __post_init__(self):
        check_same_grid(self.u, self.w)

    @property
    def grid(self) -> Grid1D:
        return self.u.grid


# -- Drift -----------------------------------------------------------------------------------------------------------


def _nonlinear_mask(grid: Grid1D, dealias: bool, band: Optional[float] = None) -> np.ndarray:
    """Nyquist always removed; 2/3 rule and the band |xi| <= band on request"""
    mask = grid.nyquist_mask()
    if dealias:
        mask = mask & grid.dealias_mask()
    if band is not None:
        mask = mask & grid.low_mask(band)
    return mask


def _filtered(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(values, axis=-1) * mask, axis=-1)


def _derivative_filtered(values: np.ndarray, grid: Grid1D, mask: np.ndarray) -> np.ndarray:
    return np.fft.ifft(1j * grid.odd_wavenumbers * np.fft.fft(values, axis=-1) * mask, axis=-1).real


def _schrodinger_rhs(u: np.ndarray, w: np.ndarray, params: SystemParams, mask: np.ndarray) -> np.ndarray:
    return _filtered(-1j * (params.gamma1 * u * w + params.beta * np.abs(u) ** 2 * u), mask)


def _kdv_rhs(u: np.ndarray, w: np.ndarray, params: SystemParams, grid: Grid1D, mask: np.ndarray) -> np.ndarray:
    # w w_x written as (w^2)_x / 2
    return _derivative_filtered(params.gamma2 * np.abs(u) ** 2 - 0.5 * w**2, grid, mask)


def _approx_rhs(
    u: np.ndarray,
    w: np.ndarray,
    params: SystemParams,
    fam: TruncationFamily,
    n: Optional[float],
    grid: Grid1D,
    mask: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    rho = np.abs(u) ** 2
    du = _filtered(-1j * (params.gamma1 * fam.psi(rho) * u * w + params.beta * rho * u * fam.phi(rho)), mask)
    flux = params.gamma2 * fam.phi(rho) * rho - 0.5 * fam.phi(w) * w**2
    dw = _derivative_filtered(flux, grid, mask & grid.low_mask(n))
    return du, dw


def drift_schrodinger(
    u: ComplexField, w: RealField, params: SystemParams = SystemParams(), dealias: bool = False
) -> ComplexField:
    """-i(gamma1 u w + beta |u|^2 u)"""
    grid = check_same_grid(u, w)
    return ComplexField(grid, _schrodinger_rhs(u.values, w.values, params, _nonlinear_mask(grid, dealias)))


def drift_kdv(u: ComplexField, w: RealField, params: SystemParams = SystemParams(), dealias: bool = False) -> RealField:
    """gamma2 d_x(|u|^2) - w d_x w"""
    grid = check_same_grid(u, w)
    return RealField(grid, _kdv_rhs(u.values, w.values, params, grid, _nonlinear_mask(grid, dealias)))


def drift_approx(
    u: ComplexField,
    w: RealField,
    approx: ApproxParams,
    fam: Optional[TruncationFamily] = None,
    params: SystemParams = SystemParams(),
    dealias: bool = False,
) -> Tuple[ComplexField, RealField]:
    """
    Drifts of the truncated system:
    -i gamma1 psi_K(|u|^2) u w - i beta |u|^2 u phi_K(|u|^2) and
    gamma2 P_n d_x(phi_K(|u|^2)|u|^2) - P_n d_x(phi_K(w) w^2) / 2
    """
    grid = check_same_grid(u, w)
    fam = fam or TruncationFamily(approx.K)
    du, dw = _approx_rhs(u.values, w.values, params, fam, approx.n, grid, _nonlinear_mask(grid, dealias))
    return ComplexField(grid, du), RealField(grid, dw)


# -- Noise -----------------------------------------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseInputs:
    """Operators and the two Wiener increments of one step"""

    phi: NoiseOperator
    psi: NoiseOperator
    inc1: WienerIncrement
    inc2: WienerIncrement


@dataclass(frozen=True)
class NoisePath:
    """Frozen noise fields sum_k (Phi e_k) d beta_k per time row, for the Picard map"""

    xi1: np.ndarray
    xi2: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid1D, timesteps: int) -> "NoisePath":
        return cls(np.zeros((timesteps, grid.points)), np.zeros((timesteps, grid.points)))


@dataclass(frozen=True)
class NoiseModel:
    """Noise operators plus the seeded streams of one path"""

    phi: NoiseOperator
    psi: NoiseOperator
    master_seed: int
    path_id: int = 0

    @property
    def streams(self) -> Tuple[NoiseStream, NoiseStream]:
        return (
            NoiseStream(self.master_seed, self.path_id, Channel.SCHRODINGER),
            NoiseStream(self.master_seed, self.path_id, Channel.KDV),
        )

    def inputs(self, step_index: int, dt: float) -> NoiseInputs:
        first, second = self.streams
        return NoiseInputs(
            phi=self.phi,
            psi=self.psi,
            inc1=sample_increment(first, dt, self.phi.basis_size, step_index),
            inc2=sample_increment(second, dt, self.psi.basis_size, step_index),
        )

    def path(self, timesteps: int, dt: float) -> NoisePath:
        xi1, xi2 = [], []
        for k in range(timesteps):
            inputs = self.inputs(k, dt)
            xi1.append(noise_field(self.phi, inputs.inc1).values)
            xi2.append(noise_field(self.psi, inputs.inc2).values)
        return NoisePath(np.stack(xi1), np.stack(xi2))

    def for_path(self, path_id: int) -> "NoiseModel":
        return replace(self, path_id=path_id)


# -- Stopping times and localization ----------------------------------------------------------------------------------


@dataclass(frozen=True)
class StoppingTracker:
    """Running restricted norms |u|_{X^t_{b,1}}, |v|_{Y~^t_{b,1}} and the first times they reach R"""

    R: float
    b: float = DEFAULT_EXPONENT
    times: Tuple[float, ...] = ()
    x_norms: Tuple[float, ...] = ()
    y_norms: Tuple[float, ...] = ()
    sigma1: Optional[float] = None
    sigma2: Optional[float] = None


def _prefix(grid: Grid1D, rows: Sequence[np.ndarray], dt: float) -> SpaceTimeField:
    values = np.stack(rows)
    if values.shape[0] < 2:
        values = np.vstack([values, np.zeros_like(values)])
    return SpaceTimeField(grid, dt, values)


def stopping_update(
    tracker: StoppingTracker, u_rows: Sequence[ComplexField], v_rows: Sequence[RealField], dt: float
) -> StoppingTracker:
    """
    Extend the running norms to every row not yet seen and set sigma at the first crossing.

    Row i sits at t_i = i*dt; its running norm is the running max of the sharp-cut norms on [0, t_i + dt).
    """
    if len(u_rows) != len(v_rows):
        raise InvalidArgumentError("u and v histories differ in length")
    if not u_rows:
        return tracker
    grid = check_same_grid(*u_rows, *v_rows)
    u_values = [row.values for row in u_rows]
    v_values = [row.values.astype(np.complex128) for row in v_rows]
    times, xs, ys = list(tracker.times), list(tracker.x_norms), list(tracker.y_norms)
    sigma1, sigma2 = tracker.sigma1, tracker.sigma2
    weight = x_weight(tracker.b)
    for i in range(len(xs), len(u_values)):
        T = (i + 1) * dt
        x = restricted_norm(_prefix(grid, u_values[: i + 1], dt), T, weight)
        y = tilde_y_norm(_prefix(grid, v_values[: i + 1], dt), tracker.b, T=T)
        if xs:
            x, y = max(x, xs[-1]), max(y, ys[-1])
        t = i * dt
        times.append(t)
        xs.append(x)
        ys.append(y)
        if sigma1 is None and x >= tracker.R:
            sigma1 = t
            logger.debug(f"sigma_R^(1) reached at t={t:.4g} (|u|_X={x:.4g}, R={tracker.R})")
        if sigma2 is None and y >= tracker.R:
            sigma2 = t
            logger.debug(f"sigma_R^(2) reached at t={t:.4g} (|v|_Y={y:.4g}, R={tracker.R})")
    return replace(tracker, times=tuple(times), x_norms=tuple(xs), y_norms=tuple(ys), sigma1=sigma1, sigma2=sigma2)


@dataclass
class Localizer:
    """
    Per-path state of the localized system: u~ = theta_R(|u|_X) u and
    w~ = theta_R(|v|_Y~) v + U(t) w0 with v = w - U(t) w0
    """

    R: float
    w0: RealField
    b: float = DEFAULT_EXPONENT
    tracker: Optional[StoppingTracker] = None
    u_rows: List[ComplexField] = field(default_factory=list)
    v_rows: List[RealField] = field(default_factory=list)

    def __post_init__(self):
        if self.tracker is None:
            self.tracker = StoppingTracker(R=self.R, b=self.b)

    def free_wave(self, t: float) -> np.ndarray:
        return airy_propagate(self.w0, t).values

    def observe(self, state: State, dt: float) -> None:
        self.u_rows.append(state.u)
        self.v_rows.append(RealField(state.grid, state.w.values - self.free_wave(state.t)))
        self.tracker = stopping_update(self.tracker, self.u_rows, self.v_rows, dt)

    def factors(self) -> Tuple[float, float]:
        if not self.tracker.x_norms:
            return 1.0, 1.0
        return float(theta_R(self.tracker.x_norms[-1], self.R)), float(theta_R(self.tracker.y_norms[-1], self.R))

    def apply(self, u: np.ndarray, w: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
        theta_u, theta_v = self.factors()
        free = self.free_wave(t)
        return theta_u * u, theta_v * (w - free) + free


# -- Stepping --------------------------------------------------------------------------------------------------------


@dataclass(frozen=True)
class _Model:
    """Right-hand side of one hierarchy level on raw samples"""

    grid: Grid1D
    params: SystemParams
    hierarchy: Hierarchy
    family: TruncationFamily
    n: Optional[float]
    m: Optional[float]
    dealias: bool

    @classmethod
    def build(
        cls, grid: Grid1D, params: SystemParams, hierarchy: Hierarchy, approx: Optional[ApproxParams], dealias: bool
    ) -> "_Model":
        hierarchy = Hierarchy(hierarchy)
        approx = approx or ApproxParams()
        if hierarchy in APPROXIMATIONS and (params.alpha != 1 or FChoice(params.f_choice) is not FChoice.U):
            raise InvalidArgumentError(f"Hierarchy '{hierarchy.value}' is defined for alpha = 1 and F(u) = u only")
        return cls(
            grid=grid,
            params=params,
            hierarchy=hierarchy,
            family=TruncationFamily(approx.K if hierarchy is Hierarchy.MNK else None),
            n=approx.n if hierarchy in (Hierarchy.MNK, Hierarchy.MN) else None,
            m=approx.m if hierarchy in APPROXIMATIONS else None,
            dealias=dealias,
        )

    @property
    def mask(self) -> np.ndarray:
        return _nonlinear_mask(self.grid, self.dealias)

    def drift(self, u: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        mask = self.mask
        if self.hierarchy in APPROXIMATIONS:
            return _approx_rhs(u, w, self.params, self.family, self.n, self.grid, mask)
        return _schrodinger_rhs(u, w, self.params, mask), _kdv_rhs(u, w, self.params, self.grid, mask)

    def noise(self, u: np.ndarray, w: np.ndarray, noise: Optional[NoiseInputs]) -> Tuple[np.ndarray, np.ndarray]:
        if noise is None:
            return np.zeros_like(u), np.zeros_like(w)
        mask = self.grid.nyquist_mask()
        gu = noise_term_schrodinger(
            ComplexField(self.grid, u),
            noise.phi,
            noise.inc1,
            self.params.alpha,
            self.params.f_choice,
            noise_projection_m=self.m,
        )
        gw = noise_term_kdv(RealField(self.grid, w), noise.psi, noise.inc2, self.params.alpha, projection_m=self.m)
        return _filtered(gu.values, mask), _filtered(gw.values, mask).real


def _rk4(
    rhs: Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]], u: np.ndarray, w: np.ndarray, dt: float
) -> Tuple[np.ndarray, np.ndarray]:
    k1u, k1w = rhs(u, w)
    k2u, k2w = rhs(u + 0.5 * dt * k1u, w + 0.5 * dt * k1w)
    k3u, k3w = rhs(u + 0.5 * dt * k2u, w + 0.5 * dt * k2w)
    k4u, k4w = rhs(u + dt * k3u, w + dt * k3w)
    return (
        u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u),
        w + dt / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w),
    )


def _propagate(values: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
    return np.fft.ifft(multiplier * np.fft.fft(values))


def _check_blowup(state: State, u: np.ndarray, w: np.ndarray, threshold: float) -> None:
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(w))):
        raise BlowUpError(f"Non-finite samples after step {state.step_index + 1}", state, state.step_index + 1)
    h1 = sobolev_norm(ComplexField(state.grid, u), 1.0)
    if h1 > threshold:
        raise BlowUpError(f"|u|_H1 = {h1:.3e} exceeds {threshold:.0e} at step {state.step_index + 1}", state, state.step_index + 1)


def step(
    state: State,
    params: SystemParams,
    scheme: SchemeConfig,
    noise: Optional[NoiseInputs] = None,
    hierarchy: Hierarchy = Hierarchy.FULL,
    approx: Optional[ApproxParams] = None,
    localizer: Optional[Localizer] = None,
    w0: Optional[RealField] = None,
    shifted: bool = False,
) -> State:
    """
    Advance one step: exact linear flows in Fourier space, drift by the configured scheme,
    Ito increment evaluated at the start of the nonlinear substep.

    With `shifted` the KdV unknown is v = w - U(t) w0 (v(0) = 0), advanced and then shifted back.
    """
    hierarchy = Hierarchy(hierarchy)
    grid = state.grid
    model = _Model.build(grid, params, hierarchy, approx, scheme.dealias)
    if hierarchy is Hierarchy.LOCALIZED and localizer is None:
        raise InvalidArgumentError("The localized system needs a Localizer")
    if shifted:
        if hierarchy not in SHIFTABLE:
            raise InvalidArgumentError(f"The shifted form is defined for {[h.value for h in SHIFTABLE]}")
        w0 = w0 if w0 is not None else (localizer.w0 if localizer is not None else None)
        if w0 is None:
            raise InvalidArgumentError("The shifted form needs the initial KdV datum w0")

    dt, t = scheme.dt, state.t

    def shift(time: float) -> np.ndarray:
        return airy_propagate(w0, time).values if shifted else np.zeros(grid.points)

    def localize(u: np.ndarray, w: np.ndarray, time: float) -> Tuple[np.ndarray, np.ndarray]:
        return localizer.apply(u, w, time) if hierarchy is Hierarchy.LOCALIZED else (u, w)

    u = state.u.values
    v = state.w.values - shift(t)
    if scheme.scheme is Scheme.EXPONENTIAL_EULER:
        u_loc, w_loc = localize(u, v + shift(t), t)
        du, dw = model.drift(u_loc, w_loc)
        gu, gw = model.noise(u_loc, v + shift(t), noise)
        u_new = _propagate(u + dt * du + gu, grid.schrodinger_multiplier(dt))
        v_new = _propagate(v + dt * dw + gw, grid.airy_multiplier(dt)).real
    else:
        half = 0.5 * dt
        u_half = _propagate(u, grid.schrodinger_multiplier(half))
        v_half = _propagate(v, grid.airy_multiplier(half)).real
        frozen = shift(t + half)

        def rhs(uu: np.ndarray, vv: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
            uu_loc, ww_loc = localize(uu, vv.real + frozen, t + half)
            return model.drift(uu_loc, ww_loc)

        u_rk, v_rk = _rk4(rhs, u_half, v_half, dt)
        if noise is not None:
            if not (np.all(np.isfinite(u_half)) and np.all(np.isfinite(v_half))):
                raise BlowUpError(f"Non-finite samples inside step {state.step_index + 1}", state, state.step_index + 1)
            u_loc, _ = localize(u_half, v_half + frozen, t + half)
            gu, gw = model.noise(u_loc, v_half + frozen, noise)
            u_rk, v_rk = u_rk + gu, v_rk + gw
        u_new = _propagate(u_rk, grid.schrodinger_multiplier(half))
        v_new = _propagate(v_rk, grid.airy_multiplier(half)).real
    w_new = v_new + shift(t + dt)
    _check_blowup(state, u_new, w_new, scheme.blowup_threshold)
    return State(ComplexField(grid, u_new), RealField(grid, w_new), t + dt, state.step_index + 1)


def initial_state(
    u0: ComplexField, w0: RealField, hierarchy: Hierarchy = Hierarchy.FULL, approx: Optional[ApproxParams] = None
) -> State:
    """State at t = 0; the approximation levels start from P_m u0, P_m w0"""
    if Hierarchy(hierarchy) in APPROXIMATIONS:
        m = (approx or ApproxParams()).m_bound
        return State(project_low(u0, m), project_low(w0, m))
    return State(u0, w0)


@dataclass
class Trajectory:
    states: List[State] = field(default_factory=list)

    @property
    def final(self) -> State:
        return self.states[-1]

    def spacetime(self, dt: float) -> Tuple[SpaceTimeField, SpaceTimeField]:
        """(u, w) rows of the recorded states"""
        u = SpaceTimeField.from_rows([s.u for s in self.states], dt)
        w = SpaceTimeField.from_rows([s.w for s in self.states], dt)
        return u, w


def integrate(
    initial: State,
    params: SystemParams,
    scheme: SchemeConfig,
    noise_model: Optional[NoiseModel] = None,
    hierarchy: Hierarchy = Hierarchy.FULL,
    approx: Optional[ApproxParams] = None,
    localizer: Optional[Localizer] = None,
    shifted: bool = False,
    w0: Optional[RealField] = None,
    hook: Optional[Callable[[State, Optional[Localizer]], None]] = None,
    steps: Optional[int] = None,
    record_every: int = 1,
) -> Trajectory:
    """
    Step from `initial` for `steps` steps (default T0/dt), calling `hook` on every state
    including the initial one. A blow-up propagates as BlowUpError after the hook has
    seen every valid state.
    """
    steps = scheme.steps if steps is None else steps
    if Hierarchy(hierarchy) is Hierarchy.LOCALIZED and localizer is None:
        localizer = Localizer(R=(approx or ApproxParams()).R_bound, w0=w0 if w0 is not None else initial.w)
    if shifted and w0 is None:
        w0 = localizer.w0 if localizer is not None else initial.w
    trajectory = Trajectory([initial])
    state = initial
    for k in range(steps):
        if localizer is not None:
            localizer.observe(state, scheme.dt)
        if hook is not None:
            hook(state, localizer)
        noise = noise_model.inputs(state.step_index, scheme.dt) if noise_model is not None else None
        state = step(state, params, scheme, noise, hierarchy, approx, localizer, w0, shifted)
        if (k + 1) % record_every == 0:
            trajectory.states.append(state)
    if localizer is not None:
        localizer.observe(state, scheme.dt)
    if hook is not None:
        hook(state, localizer)
    return trajectory


# -- Picard map ------------------------------------------------------------------------------------------------------


def _free_waves(grid: Grid1D, times: np.ndarray, f0: np.ndarray, propagator: Propagator) -> np.ndarray:
    return np.fft.ifft(propagator.multipliers(grid, times) * np.fft.fft(f0)[None, :], axis=1)


def picard_apply(
    pair: Tuple[SpaceTimeField, SpaceTimeField],
    u0: ComplexField,
    w0: RealField,
    R: float,
    params: SystemParams = SystemParams(),
    noise_path: Optional[NoisePath] = None,
    b: float = DEFAULT_EXPONENT,
    dealias: bool = False,
    tolerance: Optional[float] = DUHAMEL_TOLERANCE,
) -> Tuple[SpaceTimeField, SpaceTimeField]:
    """
    One application of the localized fixed-point map on [0, T], T the span of the pair:

    u -> S(t)u0 + int S(t-s) N(u~, w~) ds + int S(t-s) F(u~)^alpha Phi dW
    v -> int U(t-s) M(u~, w~) ds + int U(t-s) w^alpha Psi dW

    with u~ = theta_R(|u|_{X^t_{b,1}}) u, w~ = theta_R(|v|_{Y~^t_{b,1}}) v + U(t)w0 and w = v + U(t)w0.
    """
    u, v = pair
    grid = check_same_grid(u, v, u0, w0)
    if u.values.shape != v.values.shape or u.dt != v.dt:
        raise InvalidArgumentError("The pair must share one time grid")
    times = u.times
    free_kdv = _free_waves(grid, times, w0.values, Propagator.AIRY).real
    u_loc = localize_by_norm(running_norm(u, x_weight(b)), u, R).values
    w_loc = localize_by_norm(running_tilde_y_norm(v, b), v, R).values.real + free_kdv
    mask = _nonlinear_mask(grid, dealias)
    du = _schrodinger_rhs(u_loc, w_loc, params, mask)
    dw = _kdv_rhs(u_loc, w_loc, params, grid, mask)
    new_u = _free_waves(grid, times, u0.values, Propagator.SCHRODINGER)
    new_u = new_u + duhamel_integral(u.with_values(du), Propagator.SCHRODINGER, tolerance).values
    new_v = duhamel_integral(v.with_values(dw), Propagator.AIRY, tolerance).values
    if noise_path is not None:
        if noise_path.xi1.shape != u.values.shape:
            raise InvalidArgumentError("The noise path does not match the pair's time grid")
        w_full = v.values.real + free_kdv
        g1 = apply_f_choice(u_loc, params.f_choice) ** params.alpha * noise_path.xi1
        g2 = w_full**params.alpha * noise_path.xi2
        new_u = new_u + stochastic_integral(u.with_values(g1), Propagator.SCHRODINGER).values
        new_v = new_v + stochastic_integral(v.with_values(g2), Propagator.AIRY).values
    return u.with_values(new_u), v.with_values(new_v.real)


def pair_distance(first: Tuple[SpaceTimeField, SpaceTimeField], second: Tuple[SpaceTimeField, SpaceTimeField], b: float) -> float:
    """|u1 - u2|_{X^T_{b,1}} + |v1 - v2|_{Y~^T_{b,1}}"""
    du, dv = first[0] - second[0], first[1] - second[1]
    T = du.span
    return restricted_norm(du, T, x_weight(b)) + tilde_y_norm(dv, b, T=T)


def contraction_factor(
    pair1: Tuple[SpaceTimeField, SpaceTimeField],
    pair2: Tuple[SpaceTimeField, SpaceTimeField],
    u0: ComplexField,
    w0: RealField,
    R: float,
    params: SystemParams = SystemParams(),
    noise_path: Optional[NoisePath] = None,
    b: float = DEFAULT_EXPONENT,
    dealias: bool = False,
) -> float:
    """|T pair1 - T pair2| / |pair1 - pair2| in the X^T_{b,1} x Y~^T_{b,1} metric"""
    before = pair_distance(pair1, pair2, b)
    if before == 0:
        raise PreconditionError("The two pairs coincide; the contraction factor is undefined")
    image1 = picard_apply(pair1, u0, w0, R, params, noise_path, b, dealias)
    image2 = picard_apply(pair2, u0, w0, R, params, noise_path, b, dealias)
    return pair_distance(image1, image2, b) / before
