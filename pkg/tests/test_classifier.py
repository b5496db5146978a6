import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from ovaplugin.classifier import (
    IID,
    LabeledSample,
    MixingSpec,
    OneVsAllPlugInClassifier,
    effective_sample_size,
    fit_plug_in,
    theory_bandwidth,
)
from ovaplugin.kernels import gaussian_kernel


def wls_intercept(xs, ys, x, h, k):
    """Per-class oracle: weighted least squares via sqrt-weighted lstsq."""
    u = (xs[:, 0] - x) / h
    w = np.exp(-0.5 * u * u) / np.sqrt(2 * np.pi)
    D = np.vander(u, k + 1, increasing=True)
    sw = np.sqrt(w)
    theta, *_ = np.linalg.lstsq(D * sw[:, None], ys * sw, rcond=None)
    return theta[0]


def test_binary_views_three_classes():
    sample = LabeledSample(np.array([[0.1], [0.2], [0.3], [0.4]]), [1, 2, 3, 1], 3)
    model = fit_plug_in(sample, beta=1.0, h=0.5)
    np.testing.assert_array_equal(model.binary_views_.T, [[1, 0, 0, 1], [0, 1, 0, 0], [0, 0, 1, 0]])
    assert np.all(model.binary_views_.sum(axis=1) == 1)


def test_binary_views_two_classes():
    sample = LabeledSample(np.array([[0.1], [0.2], [0.3]]), [1, 2, 2], 2)
    model = fit_plug_in(sample, beta=1.0, h=0.5)
    np.testing.assert_array_equal(model.binary_views_[:, 0], 1 - model.binary_views_[:, 1])


def test_basis_order_is_floor_beta():
    sample = LabeledSample(np.array([[0.1], [0.2]]), [1, 2], 2)
    assert fit_plug_in(sample, beta=2.7, h=0.5).basis_.max_degree == 2


def test_fit_errors():
    with pytest.raises(ValueError, match="2 classes"):
        fit_plug_in(LabeledSample(np.array([[0.1]]), [1], 1), beta=1.0, h=0.5)
    sample = LabeledSample(np.array([[0.1], [0.2]]), [1, 2], 2)
    with pytest.raises(ValueError, match="bandwidth"):
        fit_plug_in(sample, beta=1.0, h=0.0)
    with pytest.raises(ValueError):
        LabeledSample(np.array([[0.1], [0.2]]), [1, 3], 2)


def test_single_class_scores(rng):
    X = rng.random((100, 1))
    clf = OneVsAllPlugInClassifier(beta=2, bandwidth=0.3, classes=[1, 2, 3]).fit(X, np.full(100, 2))
    scores = clf.decision_function([[0.5]])[0]
    np.testing.assert_allclose(scores, [0, 1, 0], atol=1e-10)
    assert clf.predict([[0.5]])[0] == 2


def test_isolated_query_is_degenerate(rng):
    X = rng.random((50, 1))
    y = rng.integers(1, 4, 50)
    clf = OneVsAllPlugInClassifier(beta=1, bandwidth=0.01).fit(X, y)
    np.testing.assert_array_equal(clf.class_scores([[50.0]]), [[0, 0, 0]])
    assert clf.predict([[50.0]])[0] == 1


def test_scores_match_per_class_oracle(rng):
    n = 200
    X = rng.random((n, 1))
    y = rng.integers(1, 4, n)
    h, beta = 0.2, 2.0
    clf = OneVsAllPlugInClassifier(beta=beta, bandwidth=h).fit(X, y)
    queries = np.linspace(0.05, 0.95, 7)
    scores = clf.decision_function(queries[:, None])
    for qi, x in enumerate(queries):
        for j in range(3):
            expected = min(1.0, max(0.0, wls_intercept(X, (y == j + 1).astype(float), x, h, 2)))
            assert scores[qi, j] == pytest.approx(expected, abs=1e-10)


def test_predict_tie_breaking():
    clf = OneVsAllPlugInClassifier(beta=1, bandwidth=0.5)
    clf.fit([[0.0], [1.0], [2.0]], [1, 2, 3])
    clf.decision_function = lambda X: np.array([[0.7, 0.2, 0.1], [0.5, 0.5, 0.1], [0, 0, 0]])
    np.testing.assert_array_equal(clf.predict(np.zeros((3, 1))), [1, 1, 1])


def test_dimension_mismatch(rng):
    clf = OneVsAllPlugInClassifier(beta=1, bandwidth=0.5).fit(rng.random((10, 2)), [1, 2] * 5)
    with pytest.raises(ValueError, match="features"):
        clf.predict([[0.1]])


def test_sklearn_api(rng):
    clf = OneVsAllPlugInClassifier(beta=2.0, mixing=MixingSpec(1, 8, 1))
    params = clf.get_params()
    assert params["beta"] == 2.0 and params["bandwidth"] == "theory"
    other = clone(clf).set_params(beta=1.0)
    assert other.beta == 1.0
    X = rng.random((1000, 1))
    y = 1 + (X[:, 0] > 0.5).astype(int)
    clf.fit(X, y)
    assert clf.bandwidth_ == pytest.approx(31 ** (-1 / 5))
    assert clf.score(X, y) > 0.95


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.permutations([1, 2, 3]))
def test_label_permutation_equivariance(seed, perm):
    rng = np.random.default_rng(seed)
    X = rng.random((120, 1))
    y = rng.integers(1, 4, 120)
    perm = np.array(perm)
    mapped = perm[y - 1]
    queries = rng.random((15, 1))
    a = OneVsAllPlugInClassifier(beta=1, bandwidth=0.2, classes=[1, 2, 3]).fit(X, y)
    b = OneVsAllPlugInClassifier(beta=1, bandwidth=0.2, classes=[1, 2, 3]).fit(X, mapped)
    sa, sb = a.decision_function(queries), b.decision_function(queries)
    # class j in a becomes class perm[j] in b
    np.testing.assert_allclose(sb[:, perm - 1], sa, atol=1e-12)
    assert np.all((sa >= 0) & (sa <= 1))
    top = np.sort(sa, axis=1)
    unique = top[:, -1] - top[:, -2] > 1e-9
    np.testing.assert_array_equal(b.predict(queries)[unique], perm[a.predict(queries) - 1][unique])
    np.testing.assert_array_equal(a.predict(queries), a.predict(queries))


@pytest.mark.parametrize("n, C2, C3, expected", [(1000, 8, 1, 31), (8, 8, 1, 2)])
def test_effective_sample_size_examples(n, C2, C3, expected):
    assert effective_sample_size(n, MixingSpec(1, C2, C3)) == expected


def test_effective_sample_size_iid():
    for n in (1, 7, 1000, 123457):
        assert effective_sample_size(n, IID) == n


def test_effective_sample_size_too_small():
    with pytest.raises(ValueError, match="larger n"):
        effective_sample_size(1, MixingSpec(1, 0.01, 1))


def test_effective_sample_size_monotone_within_blocks():
    mix = MixingSpec(1, math.log(2), 1)
    prev_block, prev = None, None
    for n in range(20, 5000):
        ne = effective_sample_size(n, mix)
        block = math.ceil((8 * n / mix.C2) ** 0.5)
        assert ne <= n
        if block == prev_block:
            assert ne >= prev
        prev_block, prev = block, ne


def test_theory_bandwidth_examples():
    assert theory_bandwidth(1024, 2, 1) == pytest.approx(0.25, rel=1e-14)
    assert theory_bandwidth(1024, 2, 1, IID) == pytest.approx(0.25, rel=1e-14)
    assert theory_bandwidth(1, 3, 2) == 1.0
    assert theory_bandwidth(4096, 1, 2) == pytest.approx(0.125, rel=1e-14)
    for n in (10, 999, 4096):
        assert theory_bandwidth(n, 2, 1, IID) == theory_bandwidth(n, 2, 1, None)
    # mixing: n_e = 31 for n = 1000, C2 = 8, C3 = 1
    assert theory_bandwidth(1000, 2, 1, MixingSpec(1, 8, 1)) == pytest.approx(31 ** (-0.2))
