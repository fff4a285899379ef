import math

import numpy as np
import pytest

from skdv.cutoffs import (
    FamilyMember,
    SmoothCutoff,
    TruncationFamily,
    check_nondecreasing,
    localize_by_norm,
    psi_family_eval,
    smoothstep,
    theta,
    theta_R,
)
from skdv.errors import InternalError, InvalidArgumentError
from skdv.spectral_core import ComplexField, SpaceTimeField


def test_smoothstep_endpoints():
    assert smoothstep(0.0) == 0.0
    assert smoothstep(1.0) == 1.0
    assert smoothstep(-3.0) == 0.0
    assert smoothstep(0.5) == pytest.approx(0.5)
    assert np.all(np.diff(smoothstep(np.linspace(0, 1, 200))) >= 0)


def test_theta_profile():
    t = np.linspace(-3, 3, 601)
    values = theta(t)
    assert np.all(values[np.abs(t) <= 1] == 1.0)
    assert np.all(values[np.abs(t) >= 2] == 0.0)
    np.testing.assert_allclose(values, values[::-1])


def test_theta_derivative_matches_finite_difference():
    t = np.linspace(0.9, 2.1, 50)
    h = 1e-6
    numeric = (theta(t + h) - theta(t - h)) / (2 * h)
    np.testing.assert_allclose(theta.derivative(t), numeric, atol=1e-6)


def test_cutoff_needs_ordered_band():
    with pytest.raises(InvalidArgumentError):
        SmoothCutoff(plateau=2.0, support=1.0)


def test_theta_R():
    assert theta_R(0.5, 1.0) == 1.0
    assert theta_R(2.5, 1.0) == 0.0
    assert theta_R(1e9, math.inf) == 1.0
    with pytest.raises(InvalidArgumentError):
        theta_R(1.0, 0.0)


def test_untruncated_family():
    fam = TruncationFamily(None)
    x = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(fam.phi(x), 1.0)
    np.testing.assert_allclose(fam.psi(x), 1.0)
    np.testing.assert_allclose(fam.psi1(x), x**2 / 2)
    np.testing.assert_allclose(fam.psi2(x), x**3 / 3)
    assert TruncationFamily(math.inf).infinite


def test_family_rejects_bad_K():
    with pytest.raises(InvalidArgumentError):
        TruncationFamily(0.0)
    with pytest.raises(InvalidArgumentError):
        TruncationFamily(-1.0)


@pytest.mark.parametrize("K", [0.5, 4.0])
def test_family_inside_plateau(K):
    fam = TruncationFamily(K)
    x = np.linspace(0, K, 11)
    np.testing.assert_allclose(fam.phi(x), 1.0)
    np.testing.assert_allclose(fam.psi(x), 1.0)
    np.testing.assert_allclose(fam.psi1(x), x**2 / 2, rtol=1e-12)
    np.testing.assert_allclose(fam.psi2(x), x**3 / 3, rtol=1e-12)


@pytest.mark.parametrize("K", [0.5, 4.0])
def test_psi_is_derivative_of_x_phi(K):
    fam = TruncationFamily(K)
    x = np.linspace(0.1, 2.5 * K, 80)
    h = 1e-6 * K
    numeric = ((x + h) * fam.phi(x + h) - (x - h) * fam.phi(x - h)) / (2 * h)
    np.testing.assert_allclose(fam.psi(x), numeric, atol=1e-5)


@pytest.mark.parametrize("K", [0.5, 4.0])
def test_antiderivatives(K):
    fam = TruncationFamily(K)
    x = np.linspace(0.1, 2.5 * K, 60)
    h = 1e-5 * K
    d1 = (fam.psi1(x + h) - fam.psi1(x - h)) / (2 * h)
    d2 = (fam.psi2(x + h) - fam.psi2(x - h)) / (2 * h)
    np.testing.assert_allclose(d1, x * fam.phi(x), atol=1e-6 * K)
    np.testing.assert_allclose(d2, x**2 * fam.phi(x), atol=1e-6 * K**2)


def test_antiderivatives_saturate():
    fam = TruncationFamily(1.0)
    assert fam.psi1(5.0) == pytest.approx(fam.psi1(2.0), abs=1e-12)
    assert fam.psi2(7.0) == pytest.approx(fam.psi2(2.0), abs=1e-12)
    assert fam.psi1(-1.5) == pytest.approx(fam.psi1(1.5))
    assert fam.psi2(-1.5) == pytest.approx(-fam.psi2(1.5))


def test_family_eval_dispatch():
    fam = TruncationFamily(2.0)
    x = np.array([0.5, 3.0])
    np.testing.assert_allclose(psi_family_eval(fam, FamilyMember.PSI1, x), fam.psi1(x))
    np.testing.assert_allclose(psi_family_eval(fam, "phi", x), fam.phi(x))
    with pytest.raises(InvalidArgumentError):
        psi_family_eval(fam, FamilyMember.PHI, np.array([np.nan]))


def test_check_nondecreasing():
    check_nondecreasing([0.0, 1.0, 1.0, 2.0])
    with pytest.raises(InternalError):
        check_nondecreasing([0.0, 2.0, 1.0])


def test_localize_by_norm(small_grid):
    rows = np.ones((4, small_grid.points))
    field = SpaceTimeField(small_grid, 0.1, rows)
    localized = localize_by_norm([0.5, 1.0, 1.5, 2.5], field, R=1.0)
    factors = localized.values[:, 0].real
    assert factors[0] == 1.0 and factors[1] == 1.0
    assert 0.0 < factors[2] < 1.0
    assert factors[3] == 0.0
    single = localize_by_norm([0.2, 3.0], ComplexField(small_grid, np.ones(small_grid.points)), R=1.0)
    assert np.all(single.values == 0)
    with pytest.raises(InvalidArgumentError):
        localize_by_norm([0.5, 1.0], field, R=1.0)
