"""
Smooth Cutoffs
Plateau cutoff theta, the amplitude truncations phi_K, psi_K, psi_{1,K}, psi_{2,K}
and norm-dependent localization of fields
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline

from skdv.errors import InternalError, InvalidArgumentError
from skdv.spectral_core import Field, SpaceTimeField

TABLE_POINTS = 4096
ArrayLike = Union[float, np.ndarray]

# S(z) = 6z^5 - 15z^4 + 10z^3, C2 with S(0) = 0, S(1) = 1
SMOOTHSTEP = Polynomial([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])
SMOOTHSTEP_DERIVATIVE = SMOOTHSTEP.deriv()


def smoothstep(z: ArrayLike) -> np.ndarray:
    z = np.clip(np.asarray(z, dtype=float), 0.0, 1.0)
    return SMOOTHSTEP(z)


@dataclass(frozen=True)
class SmoothCutoff:
    """Even C2 cutoff equal to 1 on [-plateau, plateau] and 0 outside [-support, support]"""

    plateau: float = 1.0
    support: float = 2.0

    def __post_init__(self):
        if not (0 < self.plateau < self.support) or not math.isfinite(self.support):
            raise InvalidArgumentError(f"Need 0 < plateau < support, got {self.plateau}, {self.support}")

    @property
    def width(self) -> float:
        return self.support - self.plateau

    def __call__(self, t: ArrayLike) -> np.ndarray:
        return 1.0 - smoothstep((np.abs(t) - self.plateau) / self.width)

    def derivative(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        z = (np.abs(t) - self.plateau) / self.width
        inside = (z > 0) & (z < 1)
        slope = np.where(inside, SMOOTHSTEP_DERIVATIVE(np.clip(z, 0.0, 1.0)), 0.0)
        return -np.sign(t) * slope / self.width

    def band_polynomial(self) -> Polynomial:
        """The profile on [plateau, support] as a polynomial in t"""
        return 1.0 - SMOOTHSTEP(Polynomial([-self.plateau / self.width, 1.0 / self.width]))


theta = SmoothCutoff()


def theta_R(x: ArrayLike, R: float) -> np.ndarray:
    """theta(x / R); R = inf gives 1"""
    if math.isnan(R) or R <= 0:
        raise InvalidArgumentError(f"Localization radius must be positive, got {R}")
    if math.isinf(R):
        return np.ones_like(np.asarray(x, dtype=float))
    return theta(np.asarray(x, dtype=float) / R)


class FamilyMember(str, Enum):
    PHI = "phi"
    PSI = "psi"
    PSI1 = "psi1"
    PSI2 = "psi2"


def _band_spline(profile: SmoothCutoff, power: int) -> Tuple[CubicSpline, float]:
    """Spline of int_plateau^z s^power phi(s) ds on the transition band and its value at the support"""
    integrand = Polynomial.basis(power) * profile.band_polynomial()
    antiderivative = integrand.integ(lbnd=profile.plateau)
    z = np.linspace(profile.plateau, profile.support, TABLE_POINTS)
    spline = CubicSpline(
        z,
        antiderivative(z),
        bc_type=((1, integrand(profile.plateau)), (1, integrand(profile.support))),
    )
    return spline, float(antiderivative(profile.support))


@dataclass(frozen=True)
class TruncationFamily:
    """
    phi_K(x) = phi(x/K), psi_K = x phi_K' + phi_K and the antiderivatives
    psi_{1,K}(x) = int_0^x s phi_K(s) ds, psi_{2,K}(x) = int_0^x s^2 phi_K(s) ds.

    K = None means no truncation: phi = psi = 1, psi_1 = x^2/2, psi_2 = x^3/3.
    """

    K: Optional[float] = None
    profile: SmoothCutoff = field(default_factory=SmoothCutoff)

    def __post_init__(self):
        if self.K is not None:
            if math.isinf(self.K):
                object.__setattr__(self, "K", None)
            elif math.isnan(self.K) or self.K <= 0:
                raise InvalidArgumentError(f"Truncation level K must be positive, got {self.K}")

    @property
    def infinite(self) -> bool:
        return self.K is None

    @cached_property
    def _psi1_band(self) -> Tuple[CubicSpline, float]:
        return _band_spline(self.profile, 1)

    @cached_property
    def _psi2_band(self) -> Tuple[CubicSpline, float]:
        return _band_spline(self.profile, 2)

    def phi(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.K is None:
            return np.ones_like(x)
        return self.profile(x / self.K)

    def dphi(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.K is None:
            return np.zeros_like(x)
        return self.profile.derivative(x / self.K) / self.K

    def psi(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x * self.dphi(x) + self.phi(x)

    def _scaled_antiderivative(self, r: np.ndarray, power: int) -> np.ndarray:
        """int_0^r s^power phi_K(s) ds for r >= 0"""
        p, s = self.profile.plateau, self.profile.support
        K = float(self.K)
        spline, total = self._psi1_band if power == 1 else self._psi2_band
        z = r / K
        base = p ** (power + 1) / (power + 1)
        band = spline(np.clip(z, p, s))
        scaled = np.where(z <= p, z ** (power + 1) / (power + 1), base + np.where(z >= s, total, band))
        return K ** (power + 1) * scaled

    def psi1(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.K is None:
            return 0.5 * x**2
        return self._scaled_antiderivative(np.abs(x), 1)

    def psi2(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.K is None:
            return x**3 / 3.0
        return np.sign(x) * self._scaled_antiderivative(np.abs(x), 2)


def psi_family_eval(fam: TruncationFamily, which: FamilyMember, x: ArrayLike) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("Family members are evaluated at finite points only")
    member = FamilyMember(which)
    if member is FamilyMember.PHI:
        return fam.phi(x)
    if member is FamilyMember.PSI:
        return fam.psi(x)
    if member is FamilyMember.PSI1:
        return fam.psi1(x)
    return fam.psi2(x)


def check_nondecreasing(history: Sequence[float], label: str = "running norm") -> np.ndarray:
    curve = np.asarray(history, dtype=float)
    if curve.size > 1:
        slack = 1e-12 * max(1.0, float(np.max(np.abs(curve))))
        if np.any(np.diff(curve) < -slack):
            raise InternalError(f"The {label} decreased; restricted norms must be nondecreasing in T")
    return curve


def localize_by_norm(
    history: Sequence[float], u: Union[Field, SpaceTimeField], R: float
) -> Union[Field, SpaceTimeField]:
    """
    Multiply u(., t) by theta_R(running norm at t)

    For a space-time field the history must have one entry per time row; for a
    single field the last history entry is used.
    """
    curve = check_nondecreasing(history)
    if curve.size == 0:
        raise InvalidArgumentError("Empty running-norm history")
    if isinstance(u, SpaceTimeField):
        if curve.size != u.timesteps:
            raise InvalidArgumentError(f"History has {curve.size} entries for {u.timesteps} time rows")
        return u.with_values(u.values * theta_R(curve, R)[:, None])
    return u.with_values(u.values * float(theta_R(curve[-1], R)))
