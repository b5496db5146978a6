"""Local polynomial estimation of a binary conditional probability.

At a query ``x`` with bandwidth ``h`` the estimator solves the weighted
least-squares system ``B theta = a`` in rescaled coordinates
``u_i = (X_i - x) / h``::

    B[s1, s2] = 1/(n h^d) sum_i u_i^(s1+s2) K(u_i)
    a[s]      = 1/(n h^d) sum_i y_i u_i^s K(u_i)

and returns the intercept ``theta_0``, clipped to ``[0, 1]``. When the
smallest eigenvalue of ``B`` is at or below the guard threshold the system
is declared degenerate and the estimate is 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .kernels import KernelSpec, gaussian_kernel
from .multipoly import PolyBasis, enumerate_basis

DEFAULT_GUARD = 1e-8
# Weights below this are zeroed so denormals never dominate a sum.
WEIGHT_FLOOR = 1e-300


class NumericSolveError(ArithmeticError):
    """The local system passed the eigenvalue guard but could not be solved."""


@dataclass(frozen=True)
class LocalSystem:
    bhat: np.ndarray
    avec: np.ndarray
    min_eigenvalue: float
    effective_weight_count: int


@dataclass(frozen=True)
class LPEstimate:
    raw: float
    clipped: float
    degenerate: bool


def clip_unit(v: float) -> float:
    if v <= 0.0:
        return 0.0
    if v >= 1.0:
        return 1.0
    return float(v)


def _kernel_weights(kernel: KernelSpec, U: np.ndarray) -> np.ndarray:
    w = np.asarray(kernel.evaluate(U), dtype=float)
    w[w < WEIGHT_FLOOR] = 0.0
    return w


def build_local_system(xs, ys, x, h: float, basis: PolyBasis, k: KernelSpec) -> LocalSystem:
    """Assemble ``B`` and ``a`` for one query point.

    Parameters
    ----------
    xs : array-like of shape (n, d)
        Training observations.
    ys : array-like of shape (n,)
        Binary (or any real) responses.
    x : array-like of shape (d,)
        Query point.
    h : float
        Bandwidth.
    basis, k
        Polynomial basis and kernel.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    ys = np.asarray(ys, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if xs.shape[0] == 0:
        raise ValueError("empty training sample")
    if xs.shape[0] != ys.shape[0]:
        raise ValueError(f"{xs.shape[0]} observations but {ys.shape[0]} responses")
    d = basis.dimension
    if xs.shape[1] != d or x.shape[0] != d:
        raise ValueError(
            f"dimension mismatch: basis has d={d}, observations {xs.shape[1]}, query {x.shape[0]}"
        )
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    n = xs.shape[0]
    U = (xs - x) / h
    w = _kernel_weights(k, U)
    Phi = basis.design(U)
    scale = 1.0 / (n * h**d)
    wPhi = w[:, None] * Phi
    bhat = scale * (wPhi.T @ Phi)
    bhat = 0.5 * (bhat + bhat.T)
    avec = scale * (wPhi.T @ ys)
    lam = float(np.linalg.eigvalsh(bhat)[0])
    return LocalSystem(bhat, avec, lam, int(np.count_nonzero(w)))


def lp_estimate(system: LocalSystem, guard_threshold: float = DEFAULT_GUARD) -> LPEstimate:
    if system.min_eigenvalue <= guard_threshold:
        return LPEstimate(0.0, 0.0, True)
    try:
        theta = scipy.linalg.solve(system.bhat, system.avec, assume_a="sym")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericSolveError(str(exc)) from exc
    raw = float(theta[0])
    if not np.isfinite(raw):
        raise NumericSolveError("non-finite solution of the local system")
    return LPEstimate(raw, clip_unit(raw), False)


def local_polynomial_batch(
    xs: np.ndarray,
    Y: np.ndarray,
    queries: np.ndarray,
    h: float,
    basis: PolyBasis,
    kernel: KernelSpec,
    guard_threshold: float = DEFAULT_GUARD,
    chunk_pairs: int = 2_000_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Raw intercepts at many queries for several response columns at once.

    All response columns share the same ``B`` at a given query, so one
    eigendecomposition serves every column.

    Returns
    -------
    raw : ndarray of shape (n_queries, n_columns)
        Pre-clipping estimates; 0 where the system is degenerate.
    degenerate : ndarray of bool, shape (n_queries,)
    """
    xs = np.asarray(xs, dtype=float)
    Y = np.asarray(Y, dtype=float)
    queries = np.asarray(queries, dtype=float)
    n, d = xs.shape
    M = basis.size
    scale = 1.0 / (n * h**d)
    raw = np.zeros((queries.shape[0], Y.shape[1]))
    degenerate = np.zeros(queries.shape[0], dtype=bool)
    step = max(1, chunk_pairs // max(n * M, 1))
    for start in range(0, queries.shape[0], step):
        q = queries[start : start + step]
        U = (xs[None, :, :] - q[:, None, :]) / h
        w = _kernel_weights(kernel, U.reshape(-1, d)).reshape(q.shape[0], n)
        Phi = basis.design(U)
        wPhiT = np.swapaxes(w[:, :, None] * Phi, 1, 2)
        B = scale * (wPhiT @ Phi)
        B = 0.5 * (B + np.swapaxes(B, 1, 2))
        A = scale * (wPhiT @ Y)
        lam, V = np.linalg.eigh(B)
        bad = lam[:, 0] <= guard_threshold
        lam_safe = np.where(bad[:, None], 1.0, lam)
        coef = (np.swapaxes(V, 1, 2) @ A) / lam_safe[:, :, None]
        theta0 = np.einsum("qk,qkc->qc", V[:, 0, :], coef)
        theta0[bad] = 0.0
        raw[start : start + step] = theta0
        degenerate[start : start + step] = bad
    if not np.all(np.isfinite(raw)):
        raise NumericSolveError("non-finite local polynomial estimate")
    return raw, degenerate


class LocalPolynomialRegressor(RegressorMixin, BaseEstimator):
    """Local polynomial regression with intercept extraction.

    Parameters
    ----------
    degree : int
        Polynomial order of each local fit.
    bandwidth : float
    kernel : KernelSpec or None
        Defaults to the Gaussian density in the data dimension.
    guard_threshold : float
        Minimum eigenvalue of the local Gram matrix below which the
        prediction is set to 0.
    clip : bool
        Clip predictions to ``[0, 1]`` (appropriate for probabilities).
    """

    def __init__(self, degree=1, bandwidth=0.1, kernel=None, guard_threshold=DEFAULT_GUARD, clip=True):
        self.degree = degree
        self.bandwidth = bandwidth
        self.kernel = kernel
        self.guard_threshold = guard_threshold
        self.clip = clip

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        self.n_features_in_ = X.shape[1]
        self.basis_ = enumerate_basis(X.shape[1], self.degree)
        self.kernel_ = self.kernel if self.kernel is not None else gaussian_kernel(X.shape[1])
        self.X_ = X
        self.y_ = y.astype(float)
        return self

    def predict(self, X):
        check_is_fitted(self, "X_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        raw, _ = local_polynomial_batch(
            self.X_, self.y_[:, None], X, self.bandwidth, self.basis_, self.kernel_, self.guard_threshold
        )
        raw = raw[:, 0]
        return np.clip(raw, 0.0, 1.0) if self.clip else raw
