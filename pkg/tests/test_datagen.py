import math

import numpy as np
import pytest
from scipy import integrate

from ovaplugin.datagen import (
    BayesClassifier,
    DriftSchedule,
    MixingChainSpec,
    bayes_predict,
    drift_amplitude_cap,
    eta_vector,
    gap,
    load_sample,
    make_constant_distribution,
    make_crossing_distribution,
    make_hard_margin_distribution,
    sample_drift,
    sample_iid,
    sample_mixing,
    save_sample,
    verify_holder,
    verify_margin,
)


def ks_critical(n, level=0.01):
    # Asymptotic Kolmogorov critical value c(level) / sqrt(n); c(0.01) = 1.628.
    c = math.sqrt(-0.5 * math.log(level / 2))
    return c / math.sqrt(n)


def ks_uniform(v):
    v = np.sort(v)
    n = v.size
    i = np.arange(1, n + 1)
    return max(np.max(i / n - v), np.max(v - (i - 1) / n))


@pytest.fixture
def crossing():
    return make_crossing_distribution(1, 1.0, 2.0)


def test_crossing_values(crossing):
    np.testing.assert_allclose(eta_vector(crossing, [0.5]), [0.5, 0.5])
    np.testing.assert_allclose(eta_vector(crossing, [1.0]), [1.0, 0.0])
    np.testing.assert_allclose(eta_vector(crossing, [0.75]), [0.75, 0.25])
    assert gap(crossing.eta([[1.0]]))[0] == 1.0


def test_bayes_predict(crossing):
    assert bayes_predict(crossing, [0.75]) == 1
    assert bayes_predict(crossing, [0.25]) == 2
    assert bayes_predict(crossing, [0.5]) == 1
    const = make_constant_distribution([0.7, 0.2, 0.1])
    assert bayes_predict(const, [0.3]) == 1


def test_crossing_margin_cdf_monte_carlo(crossing):
    # P(|2U - 1| <= t) = t for U uniform.
    rng = np.random.default_rng(1)
    g = gap(crossing.eta(rng.random((10**6, 1))))
    for t in (0.05, 0.2, 0.5, 0.9):
        assert np.mean(g <= t) == pytest.approx(t, abs=0.01)
    assert crossing.C0 == 1.0 and crossing.alpha == 1.0


def test_crossing_validity_region():
    with pytest.raises(ValueError, match="beta"):
        make_crossing_distribution(1, 2.0, 1.0)  # p = 1/2, cusp is only 1/2-smooth
    make_crossing_distribution(1, 2.0, 0.5)
    make_crossing_distribution(2, 1 / 3, 3.0)  # cubic profile, any beta
    make_crossing_distribution(1, 0.5, 2.0)  # sign(u) u^2 is exactly 2-smooth
    with pytest.raises(ValueError):
        make_crossing_distribution(1, 0.5, 2.5)


def test_hard_margin_gap_floor(rng):
    for m in (2, 3, 5):
        dist = make_hard_margin_distribution(2, m, 0.3, 2.0)
        eta = dist.eta(rng.random((10**4, 2)))
        assert np.all(gap(eta) >= 0.3 - 1e-12)
        np.testing.assert_allclose(eta.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(eta >= 0) and np.all(eta <= 1)


def test_hard_margin_bayes_rule_is_dominant_class(rng):
    # With a uniform gap the argmax cannot switch on the connected cube.
    dist = make_hard_margin_distribution(1, 3, 0.2, 2.0, dominant=2)
    X = rng.random((5000, 1))
    assert np.all(BayesClassifier(dist).predict(X) == 2)
    for centre in (1 / 6, 1 / 2, 5 / 6):
        assert bayes_predict(dist, [centre]) == 2


def test_hard_margin_errors():
    for g0 in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError, match="g0"):
            make_hard_margin_distribution(1, 2, g0, 2.0)


@pytest.mark.parametrize(
    "dist",
    [
        make_crossing_distribution(1, 1.0, 2.0),
        make_crossing_distribution(3, 1 / 3, 3.0),
        make_crossing_distribution(1, 0.5, 1.5),
        make_hard_margin_distribution(1, 4, 0.25, 3.0),
    ],
)
def test_simplex_closure(dist, rng):
    eta = dist.eta(rng.random((10**4, dist.d)))
    np.testing.assert_allclose(eta.sum(axis=1), 1.0, atol=1e-12)
    assert eta.min() >= 0 and eta.max() <= 1


def test_eta_outside_cube(crossing):
    with pytest.raises(ValueError, match="cube"):
        crossing.eta([[1.5]])


def test_sample_iid_label_frequencies():
    dist = make_hard_margin_distribution(1, 3, 0.2, 2.0)
    sample = sample_iid(dist, 10**5, seed=3)
    for j in range(3):
        expected, _ = integrate.quad(lambda t: dist.eta([[t]])[0, j], 0, 1)
        assert np.mean(sample.labels == j + 1) == pytest.approx(expected, abs=0.01)


def test_sample_iid_determinism_and_uniformity(crossing):
    a = sample_iid(crossing, 1000, seed=9)
    b = sample_iid(crossing, 1000, seed=9)
    np.testing.assert_array_equal(a.observations, b.observations)
    np.testing.assert_array_equal(a.labels, b.labels)
    big = sample_iid(make_crossing_distribution(2, 1.0, 1.0), 10**5, seed=4)
    for axis in range(2):
        assert ks_uniform(big.observations[:, axis]) < ks_critical(10**5)


def test_mixing_rho_zero_reproduces_iid(crossing):
    a = sample_iid(crossing, 500, seed=11)
    b = sample_mixing(crossing, 500, MixingChainSpec(0.0), seed=11)
    np.testing.assert_array_equal(a.observations, b.observations)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_mixing_hold_rate(crossing):
    s = sample_mixing(crossing, 10**4, MixingChainSpec(0.9), seed=5)
    held = np.mean(np.all(s.observations[1:] == s.observations[:-1], axis=1))
    assert held == pytest.approx(0.9, abs=0.02)


def test_mixing_stationarity(crossing):
    pooled = sample_mixing(crossing, 10**5, MixingChainSpec(0.5), seed=6).observations[:, 0]
    assert ks_uniform(pooled) < 3 * ks_critical(10**5)  # dependent draws widen the band
    # time-i marginal across independent replicates
    fixed = np.array(
        [sample_mixing(crossing, 60, MixingChainSpec(0.8), seed=s).observations[59, 0] for s in range(2000)]
    )
    assert ks_uniform(fixed) < ks_critical(2000)


def test_mixing_spec_constants():
    spec = MixingChainSpec(0.5).mixing_spec
    assert (spec.C1, spec.C3) == (1.0, 1.0)
    assert spec.C2 == pytest.approx(math.log(2))
    assert MixingChainSpec(0.0).mixing_spec.is_iid
    with pytest.raises(ValueError):
        MixingChainSpec(1.0)


def test_drift_zero_amplitude_reproduces_iid(crossing):
    a = sample_iid(crossing, 500, seed=2)
    b = sample_drift(crossing, 500, DriftSchedule.for_distribution(crossing, 0.0), seed=2)
    np.testing.assert_array_equal(a.labels, b.labels)
    np.testing.assert_array_equal(a.observations, b.observations)


def test_drift_bound_and_simplex(crossing):
    sched = DriftSchedule.for_distribution(crossing, 0.2)
    assert sched.decay == pytest.approx(3 / 5)
    grid = np.linspace(0, 1, 1000)[:, None]
    base = crossing.eta(grid)
    for i in (1, 2, 10, 1000, 10**6):
        eta_i = sched.eta_at_time(crossing, grid, i)
        assert np.max(np.abs(eta_i - base)) <= 0.2 * i ** (-0.6) + 1e-15
        np.testing.assert_allclose(eta_i.sum(axis=1), 1.0, atol=1e-12)
        assert eta_i.min() >= -1e-12 and eta_i.max() <= 1 + 1e-12


def test_drift_first_step_at_bump_centre(crossing):
    sched = DriftSchedule.for_distribution(crossing, 0.1)
    x = np.array([[0.5]])
    assert sched.psi(x, 2)[0, 0] == 1.0
    assert sched.eta_at_time(crossing, x, 1)[0, 0] == pytest.approx(crossing.eta(x)[0, 0] + 0.1)


def test_drift_amplitude_cap(crossing):
    cap = drift_amplitude_cap(crossing)
    t = np.linspace(0.01, 0.99, 9999)
    assert cap == pytest.approx(np.min((1 - t) / np.sin(np.pi * t) ** 2), rel=1e-3)
    with pytest.raises(ValueError, match="simplex"):
        DriftSchedule.for_distribution(crossing, cap * 1.01)


def test_verify_margin_crossing_slope():
    dist = make_crossing_distribution(1, 1.0, 2.0)
    t = np.geomspace(0.01, 0.3, 12)
    report = verify_margin(dist, 10**6, t, seed=0)
    assert report.all_passed
    assert abs(report.slope - 1.0) <= 0.15


def test_verify_margin_hard_margin():
    dist = make_hard_margin_distribution(1, 3, 0.25, 2.0)
    report = verify_margin(dist, 10**5, [0.01, 0.1, 0.2, 0.24, 1.0, 2.0], seed=1)
    assert np.all(report.p_hat[:4] == 0)
    assert report.all_passed
    assert report.p_hat[-1] <= 1 <= report.bound[-1]


def test_verify_holder():
    const = make_constant_distribution([0.6, 0.4])
    assert verify_holder(const, 1000).max_ratio == 0.0
    affine = make_crossing_distribution(1, 1.0, 1.5)
    assert verify_holder(affine, 1000).max_ratio == 0.0
    lip = make_crossing_distribution(1, 1.0, 1.0)
    assert verify_holder(lip, 10**4).max_ratio <= 2.0
    for dist in (
        make_crossing_distribution(1, 1 / 3, 2.0),
        make_crossing_distribution(2, 0.5, 1.5),
        make_crossing_distribution(1, 0.4, 2.5),
        make_hard_margin_distribution(2, 3, 0.2, 2.0),
    ):
        report = verify_holder(dist, 10**4, seed=3)
        assert report.passed, (dist.family, report)
        assert report.max_ratio > 0


def test_sample_round_trip(tmp_path, crossing):
    s = sample_iid(make_hard_margin_distribution(2, 3, 0.2, 1.0), 50, seed=1)
    path = tmp_path / "sample.csv"
    save_sample(s, path)
    assert path.read_text().splitlines()[0] == "d=2,m=3,n=50"
    back = load_sample(path)
    np.testing.assert_array_equal(back.observations, s.observations)
    np.testing.assert_array_equal(back.labels, s.labels)
    assert back.m == 3
