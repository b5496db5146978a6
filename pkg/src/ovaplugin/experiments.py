"""Excess-risk estimation and empirical convergence-rate experiments."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .classifier import MixingSpec, effective_sample_size, fit_plug_in, theory_bandwidth
from .datagen import (
    DriftSchedule,
    MixingChainSpec,
    SyntheticDistribution,
    bayes_labels,
    make_constant_distribution,
    make_crossing_distribution,
    make_hard_margin_distribution,
    sample_drift,
    sample_iid,
    sample_mixing,
)
from .kernels import gaussian_kernel
from .lpreg import local_polynomial_batch
from .multipoly import enumerate_basis

log = logging.getLogger(__name__)

CSV_HEADER = ["n", "n_e", "replicate", "oracle_excess", "zero_one_excess", "seed"]
REGIMES = ("iid", "mixing", "drift")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class ExperimentError(RuntimeError):
    """A run aborted part-way; partial results were flushed."""


@dataclass(frozen=True)
class RiskEstimate:
    oracle_excess: float
    zero_one_excess: float
    n_test: int
    std_error: float
    zero_one_std_error: float = float("nan")


@dataclass(frozen=True)
class RateFitResult:
    ns: list
    x_axis: str
    mean_risks: list
    fitted_slope: float
    intercept: float
    r_squared: float
    theoretical_exponent: float
    regime: str
    raw_n_slope: float | None = None


def test_seed(seed: int) -> list[int]:
    """Seed for the test set paired with a training seed."""
    return [int(seed), 1]


def excess_risk_oracle(model, dist: SyntheticDistribution, n_test: int, seed: int) -> RiskEstimate:
    """Estimate ``E[eta_{f*}(X) - eta_{f_hat}(X)]`` on ``n_test`` fresh points.

    Also returns the paired empirical 0/1 excess (labels drawn from the true
    probabilities) as a cross-check. ``model`` needs a ``predict`` returning
    labels in ``1..m``.
    """
    if n_test < 1:
        raise ValueError("n_test must be positive")
    n_features = getattr(model, "n_features_in_", dist.d)
    if n_features != dist.d:
        raise ValueError(f"model expects {n_features} features but the distribution has d={dist.d}")
    rng = np.random.default_rng(seed)
    X = rng.random((n_test, dist.d))
    u = rng.random(n_test)
    eta = dist.eta(X)
    star = bayes_labels(dist, X)
    pred = np.asarray(model.predict(X)).astype(int)
    rows = np.arange(n_test)
    diff = eta[rows, star - 1] - eta[rows, pred - 1]
    cum = np.cumsum(eta, axis=1)
    cum[:, -1] = np.inf
    y = 1 + np.argmax(u[:, None] < cum, axis=1)
    zo = (y != pred).astype(float) - (y != star).astype(float)
    sd = lambda v: float(v.std(ddof=1) / math.sqrt(n_test)) if n_test > 1 else float("nan")
    return RiskEstimate(float(diff.mean()), float(zo.mean()), n_test, sd(diff), sd(zo))


# ------------------------------------------------------------ regime logic


def theoretical_exponent(alpha: float, beta: float, d: int, regime: str = "drift_or_iid", C3: float = math.inf) -> float:
    """Exponent ``r`` in the excess-risk bound ``n^(-r)``.

    ``mixing_raw_n`` rewrites the bound in the raw sample size, which
    multiplies the exponent by ``C3 / (C3 + 1)``.
    """
    base = beta * (1 + alpha) / (2 * beta + d)
    if regime in ("drift_or_iid", "mixing_effective_n"):
        return base
    if regime == "mixing_raw_n":
        return base if math.isinf(C3) else base * C3 / (C3 + 1)
    raise ValueError(f"unknown regime {regime!r}")


def classify_regime(alpha: float, beta: float, d: int, setting: str = "drift_or_iid", C3: float = math.inf) -> str:
    if setting == "drift_or_iid" or (setting == "mixing" and math.isinf(C3)):
        if (alpha - 1) * beta > d:
            return "super_fast"
        if alpha * beta > d / 2:
            return "fast"
        return "not_fast"
    if setting == "mixing":
        if (alpha - 1 - 2 / C3) * beta > d * (1 + 1 / C3):
            return "super_fast"
        if 2 * (alpha - 1 / C3) * beta > (1 + 1 / C3) * d:
            return "fast"
        return "not_fast"
    raise ValueError(f"unknown setting {setting!r}")


# ------------------------------------------------------------ rate fitting


def fit_rate(
    ns,
    risks,
    x_axis: str = "raw_n",
    theoretical_exponent: float = float("nan"),
    regime: str = "",
) -> RateFitResult:
    """OLS of ``log risk`` on ``log n``. Non-positive risks are dropped with a warning."""
    ns = np.asarray(ns, dtype=float)
    risks = np.asarray(risks, dtype=float)
    if ns.shape != risks.shape:
        raise ValueError("ns and risks must have the same length")
    keep = risks > 0
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} non-positive risk values from the rate fit")
    ns, risks = ns[keep], risks[keep]
    if ns.shape[0] < 3:
        raise ValueError(f"need at least 3 positive grid points for a rate fit, got {ns.shape[0]}")
    lx, ly = np.log(ns), np.log(risks)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-300 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    if ss_tot <= 1e-300:
        slope = 0.0
    return RateFitResult(
        ns=[int(v) for v in ns],
        x_axis=x_axis,
        mean_risks=[float(v) for v in risks],
        fitted_slope=float(slope),
        intercept=float(intercept),
        r_squared=r2,
        theoretical_exponent=float(theoretical_exponent),
        regime=regime,
    )


# ------------------------------------------------------------ configuration


@dataclass
class ExperimentConfig:
    regime: str = "iid"
    family: str = "crossing"
    d: int = 1
    m: int = 2
    alpha: float = 1.0
    beta: float = 2.0
    g0: float = 0.2
    rho: float = 0.0
    amplitude: float = 0.0
    n_grid: list = field(default_factory=lambda: [256, 512, 1024, 2048, 4096, 8192])
    replicates: int = 10
    n_test: int = 2000
    base_seed: int = 0
    output: str = "rate.csv"

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.family not in ("crossing", "hard_margin"):
            raise ConfigError(f"unknown family {self.family!r}")
        grid = [int(v) for v in self.n_grid]
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise ConfigError(f"n_grid must be strictly increasing positive integers, got {self.n_grid}")
        self.n_grid = grid
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.n_test < 1:
            raise ConfigError("n_test must be >= 1")

    @classmethod
    def from_text(cls, text: str) -> ExperimentConfig:
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        names = {f.name: f for f in dataclasses.fields(cls)}
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in names:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            try:
                if key == "n_grid":
                    values[key] = [int(v) for v in raw.replace(" ", "").split(",") if v]
                elif key in ("d", "m", "replicates", "n_test", "base_seed"):
                    values[key] = int(raw)
                elif key in ("alpha", "beta", "g0", "rho", "amplitude"):
                    values[key] = float(raw)
                else:
                    values[key] = raw
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {raw!r}") from exc
        return cls(**values)

    @classmethod
    def from_file(cls, path) -> ExperimentConfig:
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def distribution(self) -> SyntheticDistribution:
        try:
            if self.family == "crossing":
                return make_crossing_distribution(self.d, self.alpha, self.beta)
            return make_hard_margin_distribution(self.d, self.m, self.g0, self.beta, alpha=self.alpha)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def mixing_spec(self) -> MixingSpec | None:
        if self.regime != "mixing":
            return None
        return MixingChainSpec(self.rho).mixing_spec


def replicate_seed(base_seed: int, grid_index: int, replicate: int) -> int:
    return int(base_seed) ^ (grid_index * 10007 + replicate)


def draw_training_sample(dist, n, regime, seed, rho=0.0, amplitude=0.0):
    if regime == "iid":
        return sample_iid(dist, n, seed)
    if regime == "mixing":
        return sample_mixing(dist, n, MixingChainSpec(rho), seed)
    if regime == "drift":
        return sample_drift(dist, n, DriftSchedule.for_distribution(dist, amplitude), seed)
    raise ValueError(f"unknown regime {regime!r}")


def train_and_evaluate(dist, n, regime, seed, n_test, rho=0.0, amplitude=0.0, kernel=None):
    """One replicate: draw data, fit at the theory bandwidth, estimate excess risk."""
    mix = MixingChainSpec(rho).mixing_spec if regime == "mixing" else None
    h = theory_bandwidth(n, dist.beta, dist.d, mix)
    sample = draw_training_sample(dist, n, regime, seed, rho, amplitude)
    model = fit_plug_in(sample, dist.beta, h, kernel or gaussian_kernel(dist.d))
    return excess_risk_oracle(model, dist, n_test, test_seed(seed))


# ------------------------------------------------------------ deviation probe


def deviation_probability(
    dist: SyntheticDistribution,
    n: int,
    j: int,
    x,
    delta: float,
    replicates: int = 100,
    seed: int = 0,
    regime: str = "iid",
    rho: float = 0.0,
    amplitude: float = 0.0,
) -> float:
    """Fraction of replicate training sets with ``|eta_hat_j(x) - eta_j(x)| >= delta``."""
    if replicates < 30:
        raise ValueError("deviation_probability needs at least 30 replicates")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    target = dist.eta(x)[0, j - 1]
    mix = MixingChainSpec(rho).mixing_spec if regime == "mixing" else None
    h = theory_bandwidth(n, dist.beta, dist.d, mix)
    basis = enumerate_basis(dist.d, math.floor(dist.beta))
    kernel = gaussian_kernel(dist.d)
    hits = 0
    for r in range(replicates):
        sample = draw_training_sample(dist, n, regime, replicate_seed(seed, 0, r), rho, amplitude)
        y = (sample.labels == j).astype(float)[:, None]
        raw, _ = local_polynomial_batch(sample.observations, y, x, h, basis, kernel)
        est = min(1.0, max(0.0, raw[0, 0]))
        hits += abs(est - target) >= delta
    return hits / replicates


# ------------------------------------------------------------ runner


def _write_csv(path: Path, rows) -> None:
    rows = sorted(rows, key=lambda r: (r["n"], r["replicate"]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_HEADER, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def summary_path(output) -> Path:
    out = Path(output)
    return out.with_name(out.stem + ".summary.json")


def _one_replicate(config, dist, gi, n, n_e, r):
    seed = replicate_seed(config.base_seed, gi, r)
    est = train_and_evaluate(dist, n, config.regime, seed, config.n_test, config.rho, config.amplitude)
    return {
        "n": n,
        "n_e": n_e,
        "replicate": r,
        "oracle_excess": est.oracle_excess,
        "zero_one_excess": est.zero_one_excess,
        "seed": seed,
    }


def run_experiment(config: ExperimentConfig, n_jobs: int = 1) -> RateFitResult:
    """Run every (n, replicate) cell, write the CSV and summary, and fit the rate.

    Rates are fitted against the effective sample size in the mixing regime
    and against ``n`` otherwise. The summary is written next to the CSV as
    ``<stem>.summary.json``.
    """
    dist = config.distribution()
    mix = config.mixing_spec()
    out = Path(config.output)
    out.parent.mkdir(parents=True, exist_ok=True)

    cells = []
    for gi, n in enumerate(config.n_grid):
        n_e = effective_sample_size(n, mix) if mix is not None else n
        cells += [(gi, n, n_e, r) for r in range(config.replicates)]

    rows = []
    try:
        if n_jobs == 1:
            for cell in cells:
                rows.append(_one_replicate(config, dist, *cell))
        else:
            rows = Parallel(n_jobs=n_jobs)(delayed(_one_replicate)(config, dist, *c) for c in cells)
        _write_csv(out, rows)

        by_n = {}
        for row in rows:
            by_n.setdefault((row["n"], row["n_e"]), []).append(row["oracle_excess"])
        keys = sorted(by_n)
        means = [float(np.mean(by_n[k])) for k in keys]
        if config.regime == "mixing":
            C3 = mix.C3
            setting = "mixing"
            fit = fit_rate(
                [k[1] for k in keys], means, "effective_n",
                theoretical_exponent(config.alpha, config.beta, config.d, "mixing_effective_n", C3),
                classify_regime(config.alpha, config.beta, config.d, setting, C3),
            )
            raw = fit_rate([k[0] for k in keys], means, "raw_n")
            fit = dataclasses.replace(fit, raw_n_slope=raw.fitted_slope)
        else:
            fit = fit_rate(
                [k[0] for k in keys], means, "raw_n",
                theoretical_exponent(config.alpha, config.beta, config.d),
                classify_regime(config.alpha, config.beta, config.d),
            )
    except Exception as exc:
        _write_csv(out, rows)
        _write_summary(out, {"error": f"{type(exc).__name__}: {exc}"})
        raise ExperimentError(str(exc)) from exc

    _write_summary(
        out,
        {
            "fitted_slope": fit.fitted_slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "theoretical_exponent": fit.theoretical_exponent,
            "regime": fit.regime,
            "x_axis": fit.x_axis,
            "raw_n_slope": fit.raw_n_slope,
            "ns": fit.ns,
            "mean_risks": fit.mean_risks,
        },
    )
    log.info("rate fit: slope %.3f (r^2 %.3f), theory -%.3f", fit.fitted_slope, fit.r_squared, fit.theoretical_exponent)
    return fit


def _write_summary(out: Path, record: dict) -> None:
    record = dict(record, timestamp=time.strftime("%Y-%m-%dT%H:%M:%S"))
    with open(summary_path(out), "w", encoding="utf-8") as fh:
        json.dump(record, fh, sort_keys=True)
        fh.write("\n")


__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentError",
    "RateFitResult",
    "RiskEstimate",
    "classify_regime",
    "deviation_probability",
    "excess_risk_oracle",
    "fit_rate",
    "make_constant_distribution",
    "replicate_seed",
    "run_experiment",
    "theoretical_exponent",
    "train_and_evaluate",
]
