import math

import numpy as np
import pytest
from pydantic import ValidationError

from skdv.dynamics import (
    ApproxParams,
    Hierarchy,
    Localizer,
    NoiseModel,
    NoisePath,
    Scheme,
    SchemeConfig,
    State,
    SystemParams,
    contraction_factor,
    drift_approx,
    drift_kdv,
    drift_schrodinger,
    initial_state,
    integrate,
    picard_apply,
    step,
)
from skdv.errors import BlowUpError, InvalidArgumentError, PreconditionError
from skdv.functionals import mass
from skdv.noise import build_noise_operator, gaussian_kernel
from skdv.spectral_core import ComplexField, RealField, SpaceTimeField, airy_propagate, schrodinger_propagate

FREE = SystemParams(beta=0.0, gamma1=0.0, gamma2=0.0)


@pytest.fixture
def noise_model(grid):
    phi = build_noise_operator(gaussian_kernel(grid, mass=0.01), basis_size=33, label="phi")
    psi = build_noise_operator(gaussian_kernel(grid, mass=0.01), basis_size=33, label="psi")
    return NoiseModel(phi, psi, master_seed=11, path_id=0)


def test_system_params_coupling():
    SystemParams(gamma1=0.0, gamma2=0.0)
    SystemParams(gamma1=-1.0, gamma2=-2.0)
    with pytest.raises(ValidationError):
        SystemParams(gamma1=1.0, gamma2=-1.0)
    with pytest.raises(ValidationError):
        SystemParams(alpha=0)


def test_approx_params_order():
    ApproxParams(m=4, n=8, K=1.0)
    assert ApproxParams().n_bound == math.inf
    with pytest.raises(ValidationError):
        ApproxParams(m=8, n=4)


def test_scheme_config():
    assert SchemeConfig(dt=0.01, T0=0.5).steps == 50
    with pytest.raises(ValidationError):
        SchemeConfig(dt=0.1, T0=0.05)


def test_drift_formulas(gaussian_pair):
    u, w = gaussian_pair
    du = drift_schrodinger(u, w)
    expected = -1j * (u.values * w.values + np.abs(u.values) ** 2 * u.values)
    np.testing.assert_allclose(du.values, expected, atol=1e-10)
    dw = drift_kdv(ComplexField.zeros(u.grid), RealField.zeros(u.grid))
    np.testing.assert_allclose(dw.values, 0.0)


def test_untruncated_approx_drift_matches_full(gaussian_pair):
    u, w = gaussian_pair
    du, dw = drift_approx(u, w, ApproxParams())
    np.testing.assert_allclose(du.values, drift_schrodinger(u, w).values, atol=1e-13)
    np.testing.assert_allclose(dw.values, drift_kdv(u, w).values, atol=1e-13)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_free_flow_is_exact(gaussian_pair, scheme):
    u0, _ = gaussian_pair
    w0 = RealField.zeros(u0.grid)
    config = SchemeConfig(dt=0.01, T0=0.2, scheme=scheme)
    trajectory = integrate(State(u0, w0), FREE, config)
    final = trajectory.final
    assert final.step_index == 20
    assert final.t == pytest.approx(0.2)
    np.testing.assert_allclose(final.u.values, schrodinger_propagate(u0, 0.2).values, atol=1e-10)
    np.testing.assert_allclose(final.w.values, 0.0, atol=1e-14)


def test_deterministic_mass_conservation(gaussian_pair):
    u0, w0 = gaussian_pair
    config = SchemeConfig(dt=1e-3, T0=0.2, scheme=Scheme.STRANG_RK4)
    final = integrate(State(u0, w0), SystemParams(), config).final
    assert mass(final.u) == pytest.approx(mass(u0), rel=1e-6)


def test_paths_are_reproducible(gaussian_pair, noise_model):
    u0, w0 = gaussian_pair
    config = SchemeConfig(dt=5e-3, T0=0.05)
    first = integrate(State(u0, w0), SystemParams(), config, noise_model).final
    second = integrate(State(u0, w0), SystemParams(), config, noise_model).final
    np.testing.assert_array_equal(first.u.values, second.u.values)
    np.testing.assert_array_equal(first.w.values, second.w.values)
    other = integrate(State(u0, w0), SystemParams(), config, noise_model.for_path(1)).final
    assert not np.allclose(first.u.values, other.u.values)


def test_noise_path_shape(grid, noise_model):
    path = noise_model.path(8, 0.01)
    assert path.xi1.shape == (8, grid.points)
    assert NoisePath.zeros(grid, 4).xi2.shape == (4, grid.points)


def test_approximations_need_alpha_one(gaussian_pair):
    u0, w0 = gaussian_pair
    config = SchemeConfig(dt=0.01, T0=0.01)
    with pytest.raises(InvalidArgumentError):
        step(State(u0, w0), SystemParams(alpha=2), config, hierarchy=Hierarchy.MNK, approx=ApproxParams(K=1.0))
    with pytest.raises(InvalidArgumentError):
        step(State(u0, w0), SystemParams(f_choice="conj"), config, hierarchy=Hierarchy.MN)


def test_inactive_truncation_matches_mn(gaussian_pair, noise_model):
    # |u|^2 <= 1 and |w| <= 0.5 stay well inside the plateau of phi_K for K = 100
    u0, w0 = gaussian_pair
    config = SchemeConfig(dt=5e-3, T0=0.05)
    approx = ApproxParams(m=6.0, n=6.0, K=100.0)
    start = initial_state(u0, w0, Hierarchy.MNK, approx)
    truncated = integrate(start, SystemParams(), config, noise_model, Hierarchy.MNK, approx).final
    plain = integrate(start, SystemParams(), config, noise_model, Hierarchy.MN, approx).final
    np.testing.assert_allclose(truncated.u.values, plain.u.values, atol=1e-13)
    np.testing.assert_allclose(truncated.w.values, plain.w.values, atol=1e-13)


def test_initial_state_projects_for_approximations(gaussian_pair):
    u0, w0 = gaussian_pair
    start = initial_state(u0, w0, Hierarchy.M, ApproxParams(m=1.0))
    spectrum = np.fft.fft(start.u.values)
    assert np.all(np.abs(spectrum[np.abs(u0.grid.wavenumbers) > 1.0]) < 1e-12)
    assert initial_state(u0, w0).u is u0


@pytest.mark.parametrize("scheme", list(Scheme))
def test_shifted_form_matches_unshifted(gaussian_pair, noise_model, scheme):
    u0, w0 = gaussian_pair
    config = SchemeConfig(dt=5e-3, T0=0.05, scheme=scheme)
    plain = integrate(State(u0, w0), SystemParams(), config, noise_model).final
    shifted = integrate(State(u0, w0), SystemParams(), config, noise_model, shifted=True).final
    np.testing.assert_allclose(shifted.u.values, plain.u.values, atol=1e-10)
    np.testing.assert_allclose(shifted.w.values, plain.w.values, atol=1e-10)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_shifted_unknown_differs_from_w(gaussian_pair, noise_model, scheme):
    u0, w0 = gaussian_pair
    config = SchemeConfig(dt=5e-3, T0=0.05, scheme=scheme)
    seen = []
    integrate(State(u0, w0), SystemParams(), config, noise_model, shifted=True, hook=lambda s, _: seen.append(s))
    shifts = [s.w.values - airy_propagate(w0, s.t).values for s in seen]
    assert np.all(shifts[0] == 0.0)
    middle = seen[len(seen) // 2]
    v = RealField(w0.grid, shifts[len(seen) // 2])
    assert middle.t > 0
    assert 0 < v.l2_norm() < 0.5 * middle.w.l2_norm()
    assert (middle.w - v).l2_norm() == pytest.approx(w0.l2_norm(), rel=1e-10)


def test_shifted_form_rejected_for_truncations(gaussian_pair):
    u0, w0 = gaussian_pair
    config = SchemeConfig(dt=0.01, T0=0.01)
    with pytest.raises(InvalidArgumentError):
        step(State(u0, w0), SystemParams(), config, hierarchy=Hierarchy.MN, w0=w0, shifted=True)


def test_blowup_reports_last_state(gaussian_pair):
    u0, w0 = gaussian_pair
    config = SchemeConfig(dt=0.01, T0=0.05, blowup_threshold=1e-3)
    start = State(u0, w0)
    with pytest.raises(BlowUpError) as info:
        integrate(start, SystemParams(), config)
    assert info.value.step_index == 1
    assert info.value.last_state is start


def test_localized_with_large_radius_matches_full(small_grid):
    envelope = np.exp(-(small_grid.x**2) / 8.0)
    u0 = ComplexField(small_grid, 0.5 * envelope)
    w0 = RealField(small_grid, 0.25 * envelope)
    config = SchemeConfig(dt=0.01, T0=0.08)
    localizer = Localizer(R=1e6, w0=w0)
    seen = []
    localized = integrate(
        State(u0, w0),
        SystemParams(),
        config,
        hierarchy=Hierarchy.LOCALIZED,
        localizer=localizer,
        hook=lambda state, loc: seen.append(state.step_index),
    ).final
    full = integrate(State(u0, w0), SystemParams(), config).final
    np.testing.assert_allclose(localized.u.values, full.u.values, atol=1e-10)
    np.testing.assert_allclose(localized.w.values, full.w.values, atol=1e-10)
    assert seen == list(range(9))
    assert np.all(np.diff(localizer.tracker.x_norms) >= 0)
    assert localizer.tracker.sigma1 is None


def test_localized_needs_localizer(gaussian_pair):
    u0, w0 = gaussian_pair
    with pytest.raises(InvalidArgumentError):
        step(State(u0, w0), SystemParams(), SchemeConfig(dt=0.01, T0=0.01), hierarchy=Hierarchy.LOCALIZED)


def _zero_pair(grid, timesteps=16, dt=1.0 / 16):
    zeros = np.zeros((timesteps, grid.points))
    return SpaceTimeField(grid, dt, zeros), SpaceTimeField(grid, dt, zeros)


def test_picard_of_free_system_is_free_wave(small_grid):
    u0 = ComplexField(small_grid, np.exp(-(small_grid.x**2) / 8.0))
    w0 = RealField.zeros(small_grid)
    u_image, v_image = picard_apply(_zero_pair(small_grid), u0, w0, R=10.0, params=FREE)
    for i in (0, 5, 15):
        expected = schrodinger_propagate(u0, i / 16).values
        np.testing.assert_allclose(u_image.values[i], expected, atol=1e-10)
    np.testing.assert_allclose(v_image.values, 0.0, atol=1e-14)


def test_contraction_factor(small_grid, rng):
    u0 = ComplexField(small_grid, np.exp(-(small_grid.x**2) / 8.0))
    w0 = RealField.zeros(small_grid)
    first = _zero_pair(small_grid)
    with pytest.raises(PreconditionError):
        contraction_factor(first, first, u0, w0, R=10.0, params=FREE)

    bump = np.exp(-(small_grid.x**2) / 8.0) * np.sin(np.linspace(0, math.pi, 16))[:, None]
    second = (first[0].with_values(0.1 * bump), first[1])
    # the image of u does not depend on u when every coupling is off
    assert contraction_factor(first, second, u0, w0, R=10.0, params=FREE) == pytest.approx(0.0, abs=1e-12)
