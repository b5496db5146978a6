"""One-vs-all multiclass plug-in classifier built on local polynomial fits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .kernels import KernelSpec, gaussian_kernel
from .lpreg import DEFAULT_GUARD, local_polynomial_batch
from .multipoly import enumerate_basis


@dataclass(frozen=True)
class LabeledSample:
    """Training or test data with labels in ``{1, ..., m}``."""

    observations: np.ndarray
    labels: np.ndarray
    m: int

    def __post_init__(self):
        X = np.asarray(self.observations, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.labels).astype(int).ravel()
        if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
            raise ValueError(f"need n >= 1 matching rows, got {X.shape[0]} observations and {y.shape[0]} labels")
        if self.m < 1 or y.min() < 1 or y.max() > self.m:
            raise ValueError(f"labels must lie in 1..{self.m}")
        object.__setattr__(self, "observations", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "m", int(self.m))

    @property
    def n(self) -> int:
        return self.observations.shape[0]

    @property
    def d(self) -> int:
        return self.observations.shape[1]


@dataclass(frozen=True)
class MixingSpec:
    """Constants of an exponential mixing bound ``alpha(k) <= C1 exp(-C2 k^C3)``.

    ``C3 = inf`` encodes iid data.
    """

    C1: float
    C2: float
    C3: float

    def __post_init__(self):
        if not (self.C1 > 0 and self.C2 > 0 and self.C3 > 0):
            raise ValueError(f"mixing constants must be positive, got {self}")

    @property
    def is_iid(self) -> bool:
        return math.isinf(self.C3)


IID = MixingSpec(1.0, 1.0, math.inf)


def block_size(n: int, mix: MixingSpec) -> int:
    return math.ceil((8.0 * n / mix.C2) ** (1.0 / (mix.C3 + 1.0)))


def effective_sample_size(n: int, mix: MixingSpec) -> int:
    """``floor(n / ceil((8 n / C2)^(1/(C3+1))))``, or ``n`` when ``C3`` is infinite."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    n = int(n)
    if mix.is_iid:
        return n
    ne = n // block_size(n, mix)
    if ne < 1:
        raise ValueError(
            f"effective sample size is 0 for n={n} (block size {block_size(n, mix)}); use a larger n"
        )
    return ne


def theory_bandwidth(n: int, beta: float, d: int, mix: MixingSpec | None = None) -> float:
    """``n_e^(-1/(2 beta + d))`` under mixing, ``n^(-1/(2 beta + d))`` otherwise."""
    size = effective_sample_size(n, mix) if mix is not None else int(n)
    if size < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    return float(size ** (-1.0 / (2.0 * beta + d)))


def one_vs_all_views(labels, classes) -> np.ndarray:
    """``(n, m)`` 0/1 matrix whose column ``j`` indicates ``labels == classes[j]``."""
    labels = np.asarray(labels).ravel()
    return (labels[:, None] == np.asarray(classes)[None, :]).astype(float)


class OneVsAllPlugInClassifier(ClassifierMixin, BaseEstimator):
    """Multiclass plug-in rule over per-class local polynomial estimates.

    Each class ``j`` gets its own regression of the indicator ``1{y == j}``
    by local polynomials of order ``floor(beta)``; the estimate is clipped
    to ``[0, 1]`` and the prediction is the class with the largest
    estimate (ties go to the first class in ``classes_``). Scores are not
    renormalised across classes.

    Parameters
    ----------
    beta : float
        Assumed Hoelder smoothness of the class probabilities; sets the
        local polynomial order.
    bandwidth : float or "theory"
        ``"theory"`` picks ``n^(-1/(2 beta + d))``, with ``n`` replaced by
        the effective sample size when ``mixing`` is given.
    kernel : KernelSpec or None
        Defaults to the Gaussian density kernel.
    guard_threshold : float
        Eigenvalue guard for the local Gram matrix.
    mixing : MixingSpec or None
        Mixing constants of the training sequence, used only by the
        theory bandwidth.
    classes : array-like or None
        Fixes the class set (e.g. ``1..m``) even if some class is absent
        from the training labels.
    """

    def __init__(
        self,
        beta=2.0,
        bandwidth="theory",
        kernel=None,
        guard_threshold=DEFAULT_GUARD,
        mixing=None,
        classes=None,
    ):
        self.beta = beta
        self.bandwidth = bandwidth
        self.kernel = kernel
        self.guard_threshold = guard_threshold
        self.mixing = mixing
        self.classes = classes

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.classes is not None:
            classes = np.asarray(self.classes)
            if not np.isin(y, classes).all():
                raise ValueError("training labels outside the declared classes")
        else:
            classes = np.unique(y)
        if classes.shape[0] < 2:
            raise ValueError(f"need at least 2 classes, got {classes.shape[0]}")
        n, d = X.shape
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "theory":
                raise ValueError(f"unknown bandwidth rule {self.bandwidth!r}")
            h = theory_bandwidth(n, self.beta, d, self.mixing)
        else:
            h = float(self.bandwidth)
            if not h > 0:
                raise ValueError(f"bandwidth must be positive, got {h}")
        if self.kernel is not None and self.kernel.dimension != d:
            raise ValueError(f"kernel dimension {self.kernel.dimension} does not match data dimension {d}")

        self.classes_ = classes
        self.n_features_in_ = d
        self.bandwidth_ = h
        self.basis_ = enumerate_basis(d, math.floor(self.beta))
        self.kernel_ = self.kernel if self.kernel is not None else gaussian_kernel(d)
        self.X_ = X.astype(float)
        self.binary_views_ = one_vs_all_views(y, classes)
        return self

    def _check_query(self, X):
        check_is_fitted(self, "X_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def decision_function(self, X):
        """Clipped per-class estimates, shape ``(n_queries, n_classes)``."""
        X = self._check_query(X)
        raw, _ = local_polynomial_batch(
            self.X_, self.binary_views_, X, self.bandwidth_, self.basis_, self.kernel_, self.guard_threshold
        )
        return np.clip(raw, 0.0, 1.0)

    class_scores = decision_function

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


def fit_plug_in(
    sample: LabeledSample,
    beta: float,
    h: float,
    kernel: KernelSpec | None = None,
    guard_threshold: float = DEFAULT_GUARD,
) -> OneVsAllPlugInClassifier:
    """Fit on a :class:`LabeledSample`, keeping the full class set ``1..m``."""
    if sample.m < 2:
        raise ValueError(f"need at least 2 classes, got m={sample.m}")
    model = OneVsAllPlugInClassifier(
        beta=beta,
        bandwidth=h,
        kernel=kernel,
        guard_threshold=guard_threshold,
        classes=np.arange(1, sample.m + 1),
    )
    return model.fit(sample.observations, sample.labels)
