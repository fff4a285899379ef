import math

import numpy as np
import pytest

from skdv.errors import InvalidArgumentError
from skdv.functionals import constant_intensity
from skdv.noise import (
    Channel,
    FChoice,
    NoiseStream,
    apply_f_choice,
    build_noise_operator,
    convolve,
    delta_kernel,
    diffusion_intensity,
    gaussian_kernel,
    load_kernel_csv,
    noise_field,
    noise_term_kdv,
    noise_term_schrodinger,
    sample_increment,
    trigonometric_basis,
    zero_kernel,
)
from skdv.spectral_core import ComplexField, RealField
from tests.conftest import random_field


def test_gaussian_kernel_mass(grid):
    kernel = gaussian_kernel(grid, mass=0.25, width=1.5)
    assert kernel.l2_norm() ** 2 == pytest.approx(0.25, rel=1e-10)
    with pytest.raises(InvalidArgumentError):
        gaussian_kernel(grid, mass=-1.0)


def test_basis_is_orthonormal(small_grid):
    basis = trigonometric_basis(small_grid, small_grid.points)
    gram = basis @ basis.T * small_grid.dx
    np.testing.assert_allclose(gram, np.eye(small_grid.points), atol=1e-10)


def test_basis_size_bounds(small_grid):
    with pytest.raises(InvalidArgumentError):
        trigonometric_basis(small_grid, 0)
    with pytest.raises(InvalidArgumentError):
        trigonometric_basis(small_grid, small_grid.points + 1)


def test_delta_convolution_is_identity(grid, rng):
    op = build_noise_operator(delta_kernel(grid), 9)
    f = random_field(grid, rng)
    np.testing.assert_allclose(convolve(op, f).values, f.values, atol=1e-10)


def test_convolution_matches_direct_sum(small_grid, rng):
    kernel = gaussian_kernel(small_grid, 1.0)
    op = build_noise_operator(kernel, 5)
    f = random_field(small_grid, rng, real=True)
    n, dx = small_grid.points, small_grid.dx
    # periodic sum_j k(x_i - x_j) f(x_j) dx, kernel sampled with x = 0 at index N/2
    direct = np.array([sum(kernel.values[(i - j + n // 2) % n] * f.values[j] for j in range(n)) * dx for i in range(n)])
    np.testing.assert_allclose(convolve(op, f).values, direct, atol=1e-10)


def test_basis_images_are_convolutions(small_grid):
    op = build_noise_operator(gaussian_kernel(small_grid, 0.5), 7)
    for k in range(7):
        image = convolve(op, RealField(small_grid, op.basis[k]))
        np.testing.assert_allclose(op.basis_images[k], image.values, atol=1e-12)


def test_streams_are_deterministic_and_independent():
    first = sample_increment(NoiseStream(42, 3, Channel.SCHRODINGER), 0.01, 17, step_index=5)
    again = sample_increment(NoiseStream(42, 3, Channel.SCHRODINGER), 0.01, 17, step_index=5)
    other_channel = sample_increment(NoiseStream(42, 3, Channel.KDV), 0.01, 17, step_index=5)
    other_path = sample_increment(NoiseStream(42, 4, Channel.SCHRODINGER), 0.01, 17, step_index=5)
    np.testing.assert_array_equal(first.values, again.values)
    assert not np.allclose(first.values, other_channel.values)
    assert not np.allclose(first.values, other_path.values)


def test_increment_variance():
    stream = NoiseStream(7, 0)
    dt = 0.004
    samples = np.concatenate([sample_increment(stream, dt, 129, k).values for k in range(2000)])
    assert samples.var() == pytest.approx(dt, rel=0.05)
    assert abs(samples.mean()) < 5 * math.sqrt(dt / samples.size)


def test_increment_rejects_bad_step():
    with pytest.raises(InvalidArgumentError):
        sample_increment(NoiseStream(0, 0), 0.0, 3)


def test_zero_kernel_gives_zero_noise(grid, gaussian_pair):
    u0, w0 = gaussian_pair
    op = build_noise_operator(zero_kernel(grid), 33)
    inc = sample_increment(NoiseStream(1, 0), 0.01, 33)
    assert np.all(noise_term_schrodinger(u0, op, inc).values == 0)
    assert np.all(noise_term_kdv(w0, op, inc).values == 0)


def test_increment_size_must_match(grid):
    op = build_noise_operator(gaussian_kernel(grid, 0.25), 9)
    inc = sample_increment(NoiseStream(1, 0), 0.01, 11)
    with pytest.raises(InvalidArgumentError):
        noise_field(op, inc)


def test_schrodinger_noise_term(grid, gaussian_pair):
    u0, _ = gaussian_pair
    op = build_noise_operator(gaussian_kernel(grid, 0.25), 33)
    inc = sample_increment(NoiseStream(1, 0), 0.01, 33)
    xi = noise_field(op, inc).values
    np.testing.assert_allclose(noise_term_schrodinger(u0, op, inc, alpha=2).values, u0.values**2 * xi, atol=1e-14)
    conj = noise_term_schrodinger(u0, op, inc, f_choice=FChoice.CONJ).values
    np.testing.assert_allclose(conj, np.conj(u0.values) * xi, atol=1e-14)
    with pytest.raises(InvalidArgumentError):
        noise_term_schrodinger(u0, op, inc, alpha=0)


def test_kdv_noise_projection(grid, gaussian_pair):
    _, w0 = gaussian_pair
    op = build_noise_operator(gaussian_kernel(grid, 0.25), 65)
    inc = sample_increment(NoiseStream(2, 0), 0.01, 65)
    term = noise_term_kdv(w0, op, inc, projection_m=1.0)
    assert isinstance(term, RealField)
    assert np.all(np.abs(term.spectrum()[np.abs(grid.wavenumbers) > 1.0]) < 1e-12)


def test_f_choices(grid):
    u = ComplexField(grid, np.full(grid.points, 3.0 + 4.0j))
    assert apply_f_choice(u, FChoice.RE)[0] == 3.0
    assert apply_f_choice(u, FChoice.IM)[0] == 4.0
    assert apply_f_choice(u, "conj")[0] == 3.0 - 4.0j


def test_intensity_of_full_frequency_pairs_is_constant(grid):
    op = build_noise_operator(gaussian_kernel(grid, 0.25), 65)
    D = diffusion_intensity(op)
    assert np.ptp(D.values) < 1e-10 * np.max(D.values)
    assert constant_intensity(D) == pytest.approx(float(np.mean(D.values)))


def test_kernel_csv_is_interpolated(grid, tmp_path):
    path = tmp_path / "kernel.csv"
    path.write_text("x,value\n-1.0,0.0\n0.0,2.0\n1.0,0.0\n")
    kernel = load_kernel_csv(path, grid)
    x = grid.x
    expected = np.interp(x, [-1.0, 0.0, 1.0], [0.0, 2.0, 0.0], left=0.0, right=0.0)
    np.testing.assert_allclose(kernel.values, expected)


def test_kernel_csv_needs_two_columns(grid, tmp_path):
    path = tmp_path / "kernel.csv"
    path.write_text("1.0\n2.0\n")
    with pytest.raises(InvalidArgumentError):
        load_kernel_csv(path, grid)
