"""Synthetic distributions with known class probabilities, and samplers.

Every distribution has a uniform marginal on ``[0, 1]^d`` and class
probabilities that vary along the first coordinate only, so Taylor
polynomials, Hoelder constants and margin CDFs are available in closed form.

Families
--------
crossing
    Two classes, ``eta_1(x) = 1/2 + s(2 x_1 - 1) / 2`` with
    ``s(u) = sign(u) |u|^(1/alpha)``; ``P(gap <= t) = t^alpha`` on ``[0, 1]``.
hard_margin
    One dominant class whose probability never drops below ``(1 + g0) / 2``;
    the gap between the top two probabilities is at least ``g0`` everywhere.
constant
    Fixed probability vector; useful as a test fixture.

Samplers draw the observations first, then one uniform per example for the
label, and only then any regime-specific randomness. With the regime
switched off (``rho = 0`` or ``A = 0``) they reproduce :func:`sample_iid`
exactly for the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import poch

from .classifier import LabeledSample, MixingSpec

_CAP_GRID = 100_001


def _falling(p: float, r: int) -> float:
    """Falling factorial ``p (p-1) ... (p-r+1)``."""
    return float(poch(p - r + 1, r)) if r > 0 else 1.0


def _is_odd_integer(p: float) -> bool:
    return abs(p - round(p)) < 1e-12 and int(round(p)) % 2 == 1


class _Profile:
    m: int

    def values(self, t: np.ndarray) -> np.ndarray:  # (N,) -> (N, m)
        raise NotImplementedError

    def derivative(self, t: np.ndarray, r: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class _CrossingProfile(_Profile):
    power: float
    m: int = 2

    def _signed(self, u, r):
        # r-th derivative of sign(u)|u|^p.
        c = _falling(self.power, r)
        if c == 0.0:
            return np.zeros_like(u)
        mag = np.abs(u) ** (self.power - r)
        return c * (mag if (r + 1) % 2 == 0 else np.sign(u) * mag)

    def values(self, t):
        e1 = 0.5 + 0.5 * self._signed(2.0 * t - 1.0, 0)
        return np.column_stack([e1, 1.0 - e1])

    def derivative(self, t, r):
        if r == 0:
            return self.values(t)
        g = 2.0 ** (r - 1) * self._signed(2.0 * t - 1.0, r)
        return np.column_stack([g, -g])


def _cos_derivative(t, r, freq, phase):
    return freq**r * np.cos(freq * (t - phase) + r * np.pi / 2)


@dataclass(frozen=True)
class _HardMarginProfile(_Profile):
    m: int
    g0: float
    dominant: int  # 0-based

    @property
    def _phases(self):
        return np.arange(self.m - 1) / (self.m - 1)

    def _top(self, t, r):
        # (1+g0)/2 + (1-g0)/4 * (1 + cos(2 pi t))/2
        a, b = (1 + self.g0) / 2, (1 - self.g0) / 8
        base = a + b if r == 0 else 0.0
        return base + b * _cos_derivative(t, r, 2 * np.pi, 0.0)

    def _share(self, t, r, phase):
        k = self.m - 1
        if k == 1:
            return np.full_like(t, 1.0 if r == 0 else 0.0)
        base = 1.0 / k if r == 0 else 0.0
        return base + 0.5 / k * _cos_derivative(t, r, 2 * np.pi, phase)

    def derivative(self, t, r):
        t = np.asarray(t, dtype=float)
        out = np.empty((t.shape[0], self.m))
        top = self._top(t, r)
        out[:, self.dominant] = top
        others = [j for j in range(self.m) if j != self.dominant]
        for j, phase in zip(others, self._phases):
            # Leibniz rule on (1 - top) * share.
            acc = np.zeros_like(t)
            for q in range(r + 1):
                rest = (1.0 if q == 0 else 0.0) - self._top(t, q)
                acc += math.comb(r, q) * rest * self._share(t, r - q, phase)
            out[:, j] = acc
        return out

    def values(self, t):
        return self.derivative(t, 0)


@dataclass(frozen=True)
class _ConstantProfile(_Profile):
    probs: tuple[float, ...]

    @property
    def m(self):
        return len(self.probs)

    def values(self, t):
        return np.tile(np.asarray(self.probs), (np.asarray(t).shape[0], 1))

    def derivative(self, t, r):
        return self.values(t) if r == 0 else np.zeros((np.asarray(t).shape[0], self.m))


@dataclass(frozen=True)
class SyntheticDistribution:
    """Uniform marginal on the unit cube with analytic class probabilities."""

    d: int
    m: int
    beta: float
    L: float
    alpha: float
    C0: float
    family: str
    params: dict = field(default_factory=dict)
    profile: _Profile = field(default=None, repr=False, compare=False)

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :] if X.shape[0] == self.d else X[:, None]
        if X.shape[1] != self.d:
            raise ValueError(f"expected points in dimension {self.d}, got {X.shape[1]}")
        if np.any(X < 0.0) or np.any(X > 1.0):
            raise ValueError("points must lie in the unit cube (the density is 0 outside it)")
        return X

    def eta(self, X) -> np.ndarray:
        """Class probabilities at each row of ``X``; shape ``(N, m)``."""
        X = self._check(X)
        return self.profile.values(X[:, 0])

    def eta_derivative(self, X, r: int) -> np.ndarray:
        """``r``-th derivative of every ``eta_j`` along the first coordinate."""
        X = self._check(X)
        return self.profile.derivative(X[:, 0], r)

    def taylor(self, X, X_prime) -> np.ndarray:
        """Degree ``floor(beta)`` Taylor polynomial of ``eta`` at ``X`` evaluated at ``X_prime``."""
        X, Xp = self._check(X), self._check(X_prime)
        dt = (Xp[:, 0] - X[:, 0])[:, None]
        out = np.zeros((X.shape[0], self.m))
        for r in range(math.floor(self.beta) + 1):
            out += self.eta_derivative(X, r) * dt**r / math.factorial(r)
        return out


def eta_vector(dist: SyntheticDistribution, x) -> np.ndarray:
    return dist.eta(np.asarray(x, dtype=float).reshape(1, -1))[0]


def _argmax_label(eta: np.ndarray) -> np.ndarray:
    return np.argmax(eta, axis=-1) + 1


def bayes_predict(dist: SyntheticDistribution, x) -> int:
    return int(_argmax_label(eta_vector(dist, x)))


def bayes_labels(dist: SyntheticDistribution, X) -> np.ndarray:
    return _argmax_label(dist.eta(X))


class BayesClassifier:
    """The Bayes rule of a synthetic distribution, with a ``predict`` method."""

    def __init__(self, dist: SyntheticDistribution):
        self.dist = dist
        self.n_features_in_ = dist.d

    def predict(self, X):
        return bayes_labels(self.dist, X)


def _crossing_holder_constant(p: float, k: int) -> float:
    if _is_odd_integer(p) and p <= k:
        return 0.0
    if p >= k + 1:
        return 2.0**k * abs(_falling(p, k + 1)) / math.factorial(k + 1)
    # k < p < k+1: the k-th derivative is (p-k)-Hoelder.
    return 2.0**k * abs(_falling(p, k)) / math.factorial(k)


def make_crossing_distribution(d: int, alpha: float, beta: float) -> SyntheticDistribution:
    """Two classes crossing on the hyperplane ``x_1 = 1/2`` with margin exponent ``alpha``.

    The signed profile ``sign(u)|u|^p``, ``p = 1/alpha``, is a polynomial
    when ``p`` is an odd integer (any ``beta`` is admissible) and otherwise
    has smoothness exactly ``p``, so ``beta <= 1/alpha`` is required.
    """
    if int(d) != d or d < 1:
        raise ValueError(f"invalid dimension d={d}")
    if not alpha > 0:
        raise ValueError("crossing family needs alpha > 0")
    if not beta > 0:
        raise ValueError("beta must be positive")
    p = 1.0 / alpha
    if not _is_odd_integer(p) and beta > p + 1e-12:
        raise ValueError(
            f"incompatible parameters: crossing profile with alpha={alpha} is only "
            f"{p:g}-smooth, so beta={beta} violates beta <= 1/alpha"
        )
    k = math.floor(beta)
    L = _crossing_holder_constant(p, k)
    return SyntheticDistribution(
        d=int(d),
        m=2,
        beta=float(beta),
        L=L,
        alpha=float(alpha),
        C0=1.0,
        family="crossing",
        params={"crossing": 0.5, "power": p},
        profile=_CrossingProfile(p),
    )


def make_hard_margin_distribution(
    d: int, m: int, g0: float, beta: float, alpha: float = 1.0, dominant: int = 1
) -> SyntheticDistribution:
    """``m`` classes with a uniform gap of at least ``g0`` between the top two.

    A continuous gap bounded away from zero cannot change its argmax on the
    connected cube, so one class (``dominant``) wins everywhere; the other
    classes share the remaining mass through smooth periodic weights. The
    margin condition then holds for every exponent; ``alpha`` only sets the
    reported ``C0 = g0^(-alpha)``.
    """
    if not 0.0 < g0 < 1.0:
        raise ValueError(f"g0 must lie in (0, 1), got {g0}")
    if int(m) != m or m < 2:
        raise ValueError(f"need m >= 2 classes, got {m}")
    if not 1 <= dominant <= m:
        raise ValueError(f"dominant class must be in 1..{m}")
    if int(d) != d or d < 1:
        raise ValueError(f"invalid dimension d={d}")
    profile = _HardMarginProfile(int(m), float(g0), dominant - 1)
    k = math.floor(beta)
    t = np.linspace(0.0, 1.0, 20_001)
    # Remainder of a degree-k Taylor expansion is at most sup|g^(k+1)| / (k+1)! |dx|^(k+1)
    # and |dx| <= 1 along the first axis; 1% slack covers the grid maximum.
    sup = np.max(np.abs(profile.derivative(t, k + 1)))
    L = 1.01 * float(sup) / math.factorial(k + 1)
    return SyntheticDistribution(
        d=int(d),
        m=int(m),
        beta=float(beta),
        L=L,
        alpha=float(alpha),
        C0=float(g0 ** (-alpha)),
        family="hard_margin",
        params={"g0": float(g0), "dominant": int(dominant)},
        profile=profile,
    )


def make_constant_distribution(probs, d: int = 1, beta: float = 1.0) -> SyntheticDistribution:
    probs = tuple(float(p) for p in probs)
    if len(probs) < 2 or min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-12:
        raise ValueError("probs must be a probability vector with at least 2 entries")
    top = sorted(probs, reverse=True)
    gap = top[0] - top[1]
    return SyntheticDistribution(
        d=int(d),
        m=len(probs),
        beta=float(beta),
        L=0.0,
        alpha=0.0 if gap == 0 else 1.0,
        C0=1.0 if gap == 0 else 1.0 / gap,
        family="constant",
        params={"probs": probs},
        profile=_ConstantProfile(probs),
    )


# ---------------------------------------------------------------- regimes


@dataclass(frozen=True)
class MixingChainSpec:
    """Hold-or-refresh chain: keep the previous observation with probability ``rho``.

    For ``rho > 0`` the chain is exponentially strongly mixing with
    ``alpha(k) <= rho^k``: after a refresh the future is independent of the
    past, and no refresh occurs within ``k`` steps with probability
    ``rho^k``. This gives ``C1 = 1, C2 = -ln rho, C3 = 1``.
    """

    rho: float

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"hold probability must lie in [0, 1), got {self.rho}")

    @property
    def mixing_spec(self) -> MixingSpec:
        if self.rho == 0.0:
            return MixingSpec(1.0, 1.0, math.inf)
        return MixingSpec(1.0, -math.log(self.rho), 1.0)


def drift_bump(t: np.ndarray) -> np.ndarray:
    return np.sin(np.pi * t) ** 2


@dataclass(frozen=True)
class DriftSchedule:
    """Label drift ``eta^i = eta + A i^(-(beta+d)/(2 beta+d)) psi``.

    ``psi`` adds ``b(x) = prod_k sin^2(pi x_k)`` to class 1 and removes it
    from class 2, so ``||psi_j||_inf <= 1`` and ``sum_j psi_j = 0``.
    """

    amplitude: float
    decay: float

    @classmethod
    def for_distribution(cls, dist: SyntheticDistribution, amplitude: float) -> DriftSchedule:
        if amplitude < 0:
            raise ValueError("drift amplitude must be non-negative")
        sched = cls(float(amplitude), (dist.beta + dist.d) / (2 * dist.beta + dist.d))
        cap = drift_amplitude_cap(dist)
        if amplitude > cap:
            raise ValueError(
                f"drift amplitude {amplitude} pushes eta outside the simplex; maximum is {cap:.6g}"
            )
        return sched

    def psi(self, X: np.ndarray, m: int) -> np.ndarray:
        b = np.prod(drift_bump(np.asarray(X, dtype=float)), axis=1)
        out = np.zeros((b.shape[0], m))
        out[:, 0] = b
        out[:, 1] = -b
        return out

    def weight(self, i) -> np.ndarray:
        return self.amplitude * np.asarray(i, dtype=float) ** (-self.decay)

    def eta_at_time(self, dist: SyntheticDistribution, X, i) -> np.ndarray:
        X = dist._check(X)
        w = np.broadcast_to(self.weight(i), (X.shape[0],))
        return dist.eta(X) + w[:, None] * self.psi(X, dist.m)


def drift_amplitude_cap(dist: SyntheticDistribution) -> float:
    """Largest ``A`` keeping every ``eta^i`` in the simplex.

    The worst case is ``i = 1`` with the remaining coordinates at 1/2, where
    the bump equals ``sin^2(pi x_1)``.
    """
    t = np.linspace(0.0, 1.0, _CAP_GRID)
    eta = dist.profile.values(t)
    b = drift_bump(t)
    room = np.minimum(1.0 - eta[:, 0], eta[:, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        # sin^2(pi) rounds to ~1e-32 rather than 0 at the endpoints.
        ratio = np.where(b > 1e-12, room / b, np.inf)
    return float(np.min(ratio))


# ---------------------------------------------------------------- samplers


def _draw_labels(eta: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(eta, axis=1)
    cum[:, -1] = np.inf
    return 1 + np.argmax(u[:, None] < cum, axis=1)


def sample_iid(dist: SyntheticDistribution, n: int, seed: int) -> LabeledSample:
    rng = np.random.default_rng(seed)
    X = rng.random((n, dist.d))
    u = rng.random(n)
    return LabeledSample(X, _draw_labels(dist.eta(X), u), dist.m)


def sample_mixing(dist: SyntheticDistribution, n: int, chain: MixingChainSpec, seed: int) -> LabeledSample:
    """Observations from the hold-or-refresh chain; labels drawn afresh given each observation."""
    if not isinstance(chain, MixingChainSpec):
        chain = MixingChainSpec(float(chain))
    rng = np.random.default_rng(seed)
    fresh = rng.random((n, dist.d))
    u = rng.random(n)
    if chain.rho > 0.0:
        hold = rng.random(n) < chain.rho
        hold[0] = False
        # Index of the most recent refresh at or before each step.
        source = np.maximum.accumulate(np.where(hold, 0, np.arange(n)))
        X = fresh[source]
    else:
        X = fresh
    return LabeledSample(X, _draw_labels(dist.eta(X), u), dist.m)


def sample_drift(dist: SyntheticDistribution, n: int, schedule: DriftSchedule, seed: int) -> LabeledSample:
    rng = np.random.default_rng(seed)
    X = rng.random((n, dist.d))
    u = rng.random(n)
    if schedule.amplitude == 0.0:
        eta = dist.eta(X)
    else:
        eta = schedule.eta_at_time(dist, X, np.arange(1, n + 1))
        if eta.min() < -1e-12 or eta.max() > 1 + 1e-12:
            raise ValueError("drift schedule leaves the probability simplex")
    return LabeledSample(X, _draw_labels(eta, u), dist.m)


# ---------------------------------------------------------------- verifiers


@dataclass(frozen=True)
class MarginReport:
    t_grid: np.ndarray
    p_hat: np.ndarray
    bound: np.ndarray
    passed: np.ndarray
    slope: float

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed))


def gap(eta: np.ndarray) -> np.ndarray:
    top2 = np.sort(eta, axis=1)[:, -2:]
    return top2[:, 1] - top2[:, 0]


def verify_margin(dist: SyntheticDistribution, n_probe: int, t_grid, seed: int = 0) -> MarginReport:
    """Monte Carlo check of ``P(gap <= t) <= C0 t^alpha`` with a 3-standard-error allowance.

    The slope is a least-squares fit of ``log P_hat`` on ``log t`` over the
    grid points with ``0 < P_hat`` and ``t < 1``; NaN if fewer than two.
    """
    if n_probe < 10_000:
        raise ValueError("verify_margin needs at least 10^4 probes")
    t = np.asarray(t_grid, dtype=float)
    rng = np.random.default_rng(seed)
    g = np.sort(gap(dist.eta(rng.random((n_probe, dist.d)))))
    p_hat = np.searchsorted(g, t, side="right") / n_probe
    se = np.sqrt(p_hat * (1 - p_hat) / n_probe)
    bound = dist.C0 * t**dist.alpha
    passed = p_hat <= bound + 3 * se
    use = (p_hat > 0) & (t < 1)
    slope = float(np.polyfit(np.log(t[use]), np.log(p_hat[use]), 1)[0]) if use.sum() >= 2 else float("nan")
    return MarginReport(t, p_hat, bound, passed, slope)


@dataclass(frozen=True)
class HolderReport:
    max_ratio: float
    L: float
    n_pairs: int

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.L * (1 + 1e-9) + 1e-12


def verify_holder(dist: SyntheticDistribution, n_pairs: int, seed: int = 0) -> HolderReport:
    """Largest ``|eta_j(x') - Taylor_x eta_j(x')| / ||x - x'||^beta`` over random pairs."""
    if n_pairs < 1000:
        raise ValueError("verify_holder needs at least 10^3 pairs")
    rng = np.random.default_rng(seed)
    X = rng.random((n_pairs, dist.d))
    Xp = rng.random((n_pairs, dist.d))
    rem = np.abs(dist.eta(Xp) - dist.taylor(X, Xp)).max(axis=1)
    # Exact Taylor expansions leave only rounding noise.
    rem[rem <= 1e-12] = 0.0
    dist_pow = np.linalg.norm(X - Xp, axis=1) ** dist.beta
    ratio = rem[dist_pow > 0] / dist_pow[dist_pow > 0]
    return HolderReport(float(ratio.max(initial=0.0)), dist.L, n_pairs)


# ---------------------------------------------------------------- text format


def save_sample(sample: LabeledSample, path) -> None:
    """Write ``d=..,m=..,n=..`` then one ``x_1,...,x_d,label`` row per example."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"d={sample.d},m={sample.m},n={sample.n}\n")
        for row, label in zip(sample.observations, sample.labels):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")


def load_sample(path) -> LabeledSample:
    with open(path, encoding="utf-8") as fh:
        header = dict(item.split("=") for item in fh.readline().strip().split(","))
        d, m, n = int(header["d"]), int(header["m"]), int(header["n"])
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape != (n, d + 1):
        raise ValueError(f"expected {n} rows of {d + 1} columns, got {data.shape}")
    return LabeledSample(data[:, :d], data[:, d].astype(int), m)
