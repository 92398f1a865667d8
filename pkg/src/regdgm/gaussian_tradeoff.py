"""Bias-variance analysis of regularized Gaussian mean estimation.

Data are drawn from N(mu_star, sigma2). Three estimators of the mean are
compared:

* MLE: the sample mean, unbiased with variance sigma2 / m.
* PRE: a fixed pre-trained mean ``mu_pre``, zero variance, bias ``mu_pre - mu_star``.
* REG(lam): the minimizer of the likelihood objective plus ``lam`` times the
  negative log-density of N(mu_pre, sigma2), i.e. the convex combination
  ``(1 - beta) * mean + beta * mu_pre`` with ``beta = lam / (1 + lam)``.

Everything here is closed form except :func:`monte_carlo_mse`, which is the
empirical check of the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateInterval, DegenerateOptimum, InvalidInput

AXES = ("beta", "sample_size", "bias")


@dataclass(frozen=True)
class GaussianSpec:
    """Problem instance. Defaults are sigma2=1, m=150, bias 0.1."""

    mu_star: float = 0.0
    sigma2: float = 1.0
    m: int = 150
    mu_pre: float = 0.1

    def __post_init__(self):
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise InvalidInput(f"sigma2 must be positive and finite, got {self.sigma2}")
        if int(self.m) != self.m or self.m < 1:
            raise InvalidInput(f"m must be a positive integer, got {self.m}")
        if not (math.isfinite(self.mu_star) and math.isfinite(self.mu_pre)):
            raise InvalidInput("mu_star and mu_pre must be finite")

    @classmethod
    def from_bias(cls, delta: float, sigma2: float = 1.0, m: int = 150, mu_star: float = 0.0):
        return cls(mu_star=mu_star, sigma2=sigma2, m=m, mu_pre=mu_star + delta)

    def delta(self) -> float:
        """Bias of the pre-trained estimate, ``mu_pre - mu_star``."""
        return self.mu_pre - self.mu_star

    @property
    def mse_mle(self) -> float:
        return self.sigma2 / self.m

    @property
    def mse_pre(self) -> float:
        return self.delta() ** 2


@dataclass(frozen=True)
class EstimatorKind:
    """One of MLE, PRE or REG(lam). Build with the class helpers."""

    name: str
    lam: float = 0.0

    def __post_init__(self):
        if self.name not in ("MLE", "PRE", "REG"):
            raise InvalidInput(f"unknown estimator {self.name!r}")
        if self.name == "REG" and not (self.lam >= 0):
            raise InvalidInput(f"REG lambda must be nonnegative, got {self.lam}")

    @classmethod
    def mle(cls):
        return cls("MLE")

    @classmethod
    def pre(cls):
        return cls("PRE")

    @classmethod
    def reg(cls, lam: float):
        return cls("REG", float(lam))

    @property
    def beta(self) -> float:
        if self.name == "MLE":
            return 0.0
        if self.name == "PRE":
            return 1.0
        return lambda_to_beta(self.lam)


@dataclass(frozen=True)
class TradeoffPoint:
    beta: float
    mse_reg: float
    mse_mle: float
    mse_pre: float


def lambda_to_beta(lam: float) -> float:
    if math.isinf(lam):
        return 1.0
    return lam / (1.0 + lam)


def beta_to_lambda(beta: float) -> float:
    if beta >= 1.0:
        return math.inf
    return beta / (1.0 - beta)


def estimate(kind: EstimatorKind, sample: Sequence[float], spec: GaussianSpec) -> float:
    """Apply an estimator to one training sample.

    PRE ignores ``sample``. REG(0) returns exactly the MLE value.
    """
    if kind.name == "PRE":
        return float(spec.mu_pre)
    x = np.asarray(sample, dtype=float)
    if x.size == 0:
        raise InvalidInput("estimate needs a nonempty sample")
    mean = float(np.mean(x))
    if kind.name == "MLE" or kind.lam == 0.0:
        return mean
    if math.isinf(kind.lam):
        return float(spec.mu_pre)
    w = 1.0 / (1.0 + kind.lam)
    return w * mean + (1.0 - w) * spec.mu_pre


def mse_closed_form(spec: GaussianSpec, beta: float) -> TradeoffPoint:
    if not (0.0 <= beta <= 1.0):
        raise InvalidInput(f"beta must lie in [0, 1], got {beta}")
    d2 = spec.delta() ** 2
    v = spec.sigma2 / spec.m
    mse_reg = beta * beta * d2 + (1.0 - beta) ** 2 * v
    return TradeoffPoint(beta=beta, mse_reg=mse_reg, mse_mle=v, mse_pre=d2)


def admissible_beta_interval(spec: GaussianSpec) -> tuple[float, float]:
    """Open interval of beta for which REG beats both MLE and PRE in MSE.

    Raises:
        DegenerateInterval: when the bias is zero; the interval collapses to
            (1, 1) because an unbiased PRE cannot be beaten.
    """
    s2 = spec.sigma2
    md2 = spec.m * spec.delta() ** 2
    lo = max((s2 - md2) / (s2 + md2), 0.0)
    hi = min(2.0 * s2 / (s2 + md2), 1.0)
    if not lo < hi:
        raise DegenerateInterval(lo, hi)
    return lo, hi


def optimal_beta(spec: GaussianSpec) -> tuple[float, float, float]:
    """Return ``(beta_star, lambda_star, mse_min)`` minimizing the REG MSE."""
    d2 = spec.delta() ** 2
    if d2 == 0.0:
        raise DegenerateOptimum()
    s2 = spec.sigma2
    md2 = spec.m * d2
    beta_star = s2 / (s2 + md2)
    lambda_star = s2 / md2
    mse_min = s2 * d2 / (s2 + md2)
    return beta_star, lambda_star, mse_min


def expected_risk(spec: GaussianSpec, mse: float) -> float:
    """Expected negative log-likelihood risk of an estimator with the given MSE."""
    if not mse >= 0:
        raise InvalidInput(f"mse must be nonnegative, got {mse}")
    s2 = spec.sigma2
    return mse / (2.0 * s2) + 0.5 * math.log(2.0 * math.pi * s2) + 0.5


def _trial_rng(seed: int, t: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(t)]))


def monte_carlo_mse(
    spec: GaussianSpec, kind: EstimatorKind, trials: int, seed: int = 0
) -> tuple[float, float]:
    """Empirical MSE of an estimator and its plug-in standard error.

    Trial ``t`` draws its sample from a stream seeded by ``(seed, t)``, and the
    squared errors are summed with ``math.fsum``, so the result does not depend
    on the order in which trials are evaluated.

    The standard error is ``sqrt(var(sq_err, ddof=1) / trials)``.
    """
    if trials < 2:
        raise InvalidInput("monte_carlo_mse needs at least 2 trials")
    if kind.beta == 1.0:
        return spec.mse_pre, 0.0
    sd = math.sqrt(spec.sigma2)
    sq = np.empty(trials)
    for t in range(trials):
        x = spec.mu_star + sd * _trial_rng(seed, t).standard_normal(spec.m)
        sq[t] = (estimate(kind, x, spec) - spec.mu_star) ** 2
    mean = math.fsum(sq) / trials
    var = math.fsum((sq - mean) ** 2) / (trials - 1)
    return mean, math.sqrt(var / trials)


@dataclass
class SweepRow:
    axis_value: float
    beta: float
    lam: float
    mse_reg_cf: float
    mse_mle_cf: float
    mse_pre_cf: float
    mse_reg_mc: float | None = None
    stderr: float | None = None
    degenerate: bool = False
    # closed-form gaps of REG to each baseline; positive means REG is better
    gap_vs_mle: float = field(init=False)
    gap_vs_pre: float = field(init=False)

    def __post_init__(self):
        self.gap_vs_mle = self.mse_mle_cf - self.mse_reg_cf
        self.gap_vs_pre = self.mse_pre_cf - self.mse_reg_cf


SWEEP_HEADER = (
    "axis_value", "beta", "lambda", "mse_reg_cf", "mse_mle_cf",
    "mse_pre_cf", "mse_reg_mc", "stderr",
)


def _optimal_or_limit(spec: GaussianSpec) -> tuple[float, float, bool]:
    try:
        beta, lam, _ = optimal_beta(spec)
        return beta, lam, False
    except DegenerateOptimum:
        return 1.0, math.inf, True


def sweep(
    spec: GaussianSpec,
    axis: str,
    grid: Sequence[float],
    mc_trials: int = 0,
    seed: int = 0,
) -> list[SweepRow]:
    """Tabulate closed-form (and optionally Monte-Carlo) MSEs along one axis.

    ``axis`` is ``"beta"`` (vary the regularization weight at ``spec``),
    ``"sample_size"`` (vary m) or ``"bias"`` (vary mu_pre - mu_star). On the
    last two axes lambda is set to its optimum at each grid point; a zero
    bias yields the beta=1 limit row flagged ``degenerate``.
    """
    axis = axis.lower().replace("-", "_")
    if axis not in AXES:
        raise InvalidInput(f"unknown sweep axis {axis!r}; expected one of {AXES}")
    if len(grid) == 0:
        raise InvalidInput("sweep grid is empty")
    if mc_trials == 1 or mc_trials < 0:
        raise InvalidInput("mc_trials must be 0 or at least 2")

    rows = []
    for i, g in enumerate(grid):
        g = float(g)
        if not math.isfinite(g):
            raise InvalidInput(f"grid value {g} is not finite")
        degenerate = False
        if axis == "beta":
            if not 0.0 <= g <= 1.0:
                raise InvalidInput(f"beta grid value {g} outside [0, 1]")
            point_spec, beta = spec, g
            lam = beta_to_lambda(beta)
        elif axis == "sample_size":
            if g != int(g) or g < 1:
                raise InvalidInput(f"sample size grid value {g} is not a positive integer")
            point_spec = GaussianSpec(spec.mu_star, spec.sigma2, int(g), spec.mu_pre)
            beta, lam, degenerate = _optimal_or_limit(point_spec)
        else:
            point_spec = GaussianSpec.from_bias(g, spec.sigma2, spec.m, spec.mu_star)
            beta, lam, degenerate = _optimal_or_limit(point_spec)

        tp = mse_closed_form(point_spec, beta)
        row = SweepRow(g, beta, lam, tp.mse_reg, tp.mse_mle, tp.mse_pre, degenerate=degenerate)
        if mc_trials:
            row.mse_reg_mc, row.stderr = monte_carlo_mse(
                point_spec, EstimatorKind.reg(lam), mc_trials, seed=seed + i
            )
        rows.append(row)
    return rows
