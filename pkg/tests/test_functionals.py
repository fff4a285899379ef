import math

import numpy as np
import pytest

from skdv.cutoffs import TruncationFamily
from skdv.errors import InvalidArgumentError
from skdv.functionals import (
    MomentSeries,
    NormOrder,
    conserved_triple,
    constant_intensity,
    energy,
    estimate_lyapunov_constant,
    h1_pair_norm_sq,
    lyapunov_lower_bound,
    lyapunov_Q,
    mass,
    mass_drift_oracle,
    mixed_norm,
    momentum,
)
from skdv.spectral_core import ComplexField, RealField, SpaceTimeField


def test_mass_of_gaussian(gaussian_pair):
    u, _ = gaussian_pair
    assert mass(u) == pytest.approx(2 * math.sqrt(math.pi), rel=1e-10)


def test_momentum_of_modulated_gaussian(gaussian_pair):
    # Im(u conj(u_x)) = -k |u|^2 for u = g e^{ikx}
    u, w = gaussian_pair
    expected = -0.5 * 2 * math.sqrt(math.pi) + 0.5 * 0.25 * 2 * math.sqrt(math.pi)
    assert momentum(u, w) == pytest.approx(expected, rel=1e-8)


def test_momentum_of_real_u_is_kdv_part(grid):
    envelope = np.exp(-(grid.x**2) / 8.0)
    u = ComplexField(grid, envelope)
    w = RealField.zeros(grid)
    assert momentum(u, w) == pytest.approx(0.0, abs=1e-12)


def test_energy_matches_untruncated_on_plateau(gaussian_pair):
    u, w = gaussian_pair
    assert energy(u, w, TruncationFamily(4.0)) == pytest.approx(energy(u, w, TruncationFamily(None)), rel=1e-12)


def test_energy_of_pure_schrodinger_part(grid):
    # |u_x|^2 + |u|^4/2 for w = 0
    g = np.exp(-(grid.x**2) / 8.0)
    u = ComplexField(grid, g)
    gradient = np.sum((grid.x / 4.0 * g) ** 2) * grid.dx
    quartic = 0.5 * np.sum(g**4) * grid.dx
    assert energy(u, RealField.zeros(grid), TruncationFamily(None)) == pytest.approx(gradient + quartic, rel=1e-8)


def test_conserved_triple(gaussian_pair):
    u, w = gaussian_pair
    fam = TruncationFamily(2.0)
    triple = conserved_triple(u, w, fam, t=0.5)
    assert triple.t == 0.5 and triple.K == 2.0
    assert triple.mass == mass(u)
    assert triple.energy == energy(u, w, fam)


def test_lyapunov_dominates_lower_bound_for_gaussian(gaussian_pair):
    u, w = gaussian_pair
    fam = TruncationFamily(None)
    assert lyapunov_Q(u, w, fam) > 0
    assert h1_pair_norm_sq(u, w) <= lyapunov_lower_bound(u, w)


def test_lyapunov_constant_estimate(small_grid):
    estimate = estimate_lyapunov_constant(small_grid, K=1.0, trials=20, seed=3)
    assert estimate.trials == 20
    assert 0 < estimate.constant < math.inf
    again = estimate_lyapunov_constant(small_grid, K=1.0, trials=20, seed=3)
    assert again.constant == estimate.constant


def test_moment_series_from_samples():
    series = MomentSeries.from_samples([0.0, 1.0], np.array([[1.0, 2.0], [3.0, 4.0]]), order=1)
    np.testing.assert_allclose(series.estimates, [2.0, 3.0])
    np.testing.assert_allclose(series.standard_errors, [1.0, 1.0])
    assert series.paths == 2

    single = MomentSeries.from_samples([0.0, 1.0], np.array([[1.0, 2.0]]), order=2)
    np.testing.assert_allclose(single.standard_errors, 0.0)

    empty = MomentSeries.from_samples([0.0, 1.0], np.zeros((0, 2)), order=1)
    assert empty.paths == 0


@pytest.mark.parametrize("order", list(NormOrder))
def test_mixed_norm_of_constant(small_grid, order):
    dt, rows = 0.05, 20
    field = SpaceTimeField(small_grid, dt, np.ones((rows, small_grid.points)))
    expected = math.sqrt(small_grid.length * rows * dt)
    assert mixed_norm(field, 2, 2, order) == pytest.approx(expected, rel=1e-12)
    assert mixed_norm(field, math.inf, math.inf, order) == 1.0


def test_mixed_norm_rejects_bad_exponents(small_grid):
    field = SpaceTimeField(small_grid, 0.1, np.ones((2, small_grid.points)))
    with pytest.raises(InvalidArgumentError):
        mixed_norm(field, 0.0, 2.0)
    with pytest.raises(InvalidArgumentError):
        mixed_norm(field, 2.0, math.nan)


def test_constant_intensity(small_grid):
    assert constant_intensity(RealField(small_grid, np.full(small_grid.points, 0.3))) == pytest.approx(0.3)
    assert constant_intensity(RealField.zeros(small_grid)) == 0.0
    with pytest.raises(InvalidArgumentError):
        constant_intensity(RealField(small_grid, 1.0 + 0.1 * np.cos(small_grid.x)))


def test_mass_drift_oracle(small_grid):
    D = RealField(small_grid, np.full(small_grid.points, 0.1))
    predicted = mass_drift_oracle(2.0, D, [0.0, 1.0, 2.0])
    np.testing.assert_allclose(predicted, [2.0, 2.0 * math.exp(0.1), 2.0 * math.exp(0.2)])
