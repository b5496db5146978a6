import numpy as np
import pytest

from ovaplugin.kernels import KernelSpec, gaussian_kernel, validate_kernel


def test_gaussian_values_at_origin():
    assert gaussian_kernel(1)([0.0]) == pytest.approx((2 * np.pi) ** -0.5)
    assert gaussian_kernel(2)([0.0, 0.0]) == pytest.approx(1 / (2 * np.pi))


def test_gaussian_lower_bound_constant_d1():
    k = gaussian_kernel(1)
    c = k.lower_bound_constant
    assert 0.2 <= c < 1
    u = np.linspace(-c, c, 1001)[:, None]
    assert np.min(k.evaluate(u) - c) >= 0


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("beta", [1, 2, 3])
def test_gaussian_passes_all_conditions(d, beta):
    report = validate_kernel(gaussian_kernel(d), beta, d, tol=1e-3)
    assert report.valid
    assert abs(report.integral - 1) <= 1e-3
    assert np.isfinite(report.sup_condition_value)
    assert np.isfinite(report.square_integral_value)


def test_gaussian_d2_integral():
    report = validate_kernel(gaussian_kernel(2), 1.0, 2, tol=1e-3)
    assert report.integral == pytest.approx(1.0, abs=1e-3)


def test_heavy_tailed_kernel_fails_sup_condition():
    cauchy = KernelSpec(lambda U: 1.0 / (1.0 + np.sum(U**2, axis=-1)), 0.2, "cauchy_like", 1)
    report = validate_kernel(cauchy, 2.0, 1, tol=1e-3)
    assert not report.sup_condition_holds
    assert not report.integrates_to_one
    assert not report.square_integral_holds
    assert not report.valid


def test_normalised_density_integrates_to_one():
    # Laplace density: a different normalised kernel, no closed-form tail shortcut.
    lap = KernelSpec(lambda U: 0.5 * np.exp(-np.abs(U[:, 0])), 0.3, "laplace", 1)
    report = validate_kernel(lap, 1.0, 1, tol=1e-3)
    assert abs(report.integral - 1) <= 1e-3
    assert report.integrates_to_one


def test_bad_arguments():
    with pytest.raises(ValueError):
        validate_kernel(gaussian_kernel(1), 1.0, 1, tol=0)
    with pytest.raises(ValueError):
        KernelSpec(lambda U: U[:, 0], 0.0, "bad", 1)
