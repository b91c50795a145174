"""Resampling inference for reliance estimates."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError, RelianceError, UsageError
from ..losses import LossSpec
from ..models import FitterSpec, Oracle
from ..tabular import Dataset, Partition
from .estimators import estimate_reliance, resolve_method

MIN_RESAMPLES = 100
DEFAULT_RESAMPLES = 1000
MAX_REDRAWS = 1000


@dataclass(frozen=True)
class BootstrapResult:
    r_hat: float
    normalized: float
    r_interval: tuple[float, float]
    normalized_interval: tuple[float, float]
    r_draws: np.ndarray
    normalized_draws: np.ndarray
    B: int
    seed: int
    refit: bool
    redrawn: int

    def to_dict(self) -> dict:
        return {"r_hat": self.r_hat, "normalized": self.normalized, "r_interval": list(self.r_interval),
                "normalized_interval": list(self.normalized_interval), "B": self.B, "seed": self.seed,
                "refit": self.refit, "redrawn": self.redrawn}


def _check_B(B: int, strict: bool) -> None:
    if B < 1:
        raise UsageError("number of bootstrap resamples must be positive")
    if strict and B < MIN_RESAMPLES:
        raise UsageError(f"need at least {MIN_RESAMPLES} bootstrap resamples; got {B}")


def _percentile_interval(draws: np.ndarray, level: float) -> tuple[float, float]:
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(draws, [100 * alpha, 100 * (1 - alpha)])
    return float(lo), float(hi)


def bootstrap_reliance(data: Dataset, oracle: Oracle, loss: LossSpec, partition: Partition,
                       B: int = DEFAULT_RESAMPLES, seed: int = 0, refit: bool = False,
                       fitter: FitterSpec | None = None, level: float = 0.95, method: str = "auto",
                       strict: bool = True) -> BootstrapResult:
    """Nonparametric row bootstrap of ``r_hat`` and ``r_hat - b_hat``.

    With ``refit=False`` the oracle is held fixed (inference conditional on
    the fitted oracle). With ``refit=True`` ``fitter`` re-estimates it on
    every resample. Resamples with fewer than two distinct rows, or on
    which the refit fails, are redrawn and counted in ``redrawn``.
    Intervals are percentile intervals at ``level``. ``strict=False`` lifts
    the minimum-resample guard (for degenerate checks only).
    """
    _check_B(B, strict)
    if data.n < 2:
        raise UsageError(f"bootstrap needs at least 2 rows; got {data.n}")
    if refit and fitter is None:
        raise UsageError("refit=True needs a fitter specification")
    method = resolve_method(data, partition, method)
    point = estimate_reliance(data, oracle, loss, partition, method)
    rng = np.random.default_rng(seed)
    r_draws, d_draws = np.empty(B), np.empty(B)
    redrawn = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for b in range(B):
            for _ in range(MAX_REDRAWS):
                idx = rng.integers(0, data.n, data.n)
                if len(np.unique(idx)) < 2:
                    redrawn += 1
                    continue
                sample = data.take(idx)
                try:
                    f = fitter.fit(sample, partition.outcome) if refit else oracle
                    est = estimate_reliance(sample, f, loss, partition, method)
                except (NumericalError, UsageError):
                    if not refit:
                        raise
                    redrawn += 1
                    continue
                break
            else:
                raise NumericalError(f"bootstrap: {MAX_REDRAWS} consecutive unusable resamples")
            r_draws[b], d_draws[b] = est.r_hat, est.normalized
    return BootstrapResult(point.r_hat, point.normalized, _percentile_interval(r_draws, level),
                           _percentile_interval(d_draws, level), r_draws, d_draws, B, seed, refit, redrawn)


@dataclass(frozen=True)
class ParityResult:
    statistic: float
    p_value: float
    B: int
    seed: int
    scheme: str
    null_draws: np.ndarray
    redrawn: int

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value, "B": self.B, "seed": self.seed,
                "scheme": self.scheme, "redrawn": self.redrawn}


def parity_test(data: Dataset, fitter: FitterSpec, partition: Partition, loss: LossSpec | None = None,
                B: int = DEFAULT_RESAMPLES, seed: int = 0, method: str = "auto") -> ParityResult:
    """Test conditional statistical parity, H0: ``r = b`` against ``r > b``.

    Under square loss ``r = b`` holds exactly when the outcome is
    conditionally mean independent of ``x1`` given ``x2``. The statistic is
    ``r_hat - b_hat`` with the oracle fitted by ``fitter``. Its null
    distribution comes from a refitting bootstrap that imposes H0: the
    fitter is re-run without ``x1`` to get ``g(x2)``, outcomes are redrawn
    around ``g`` (Bernoulli draws for a logistic fitter, Rademacher wild
    residuals otherwise), the full oracle is refitted and the statistic
    recomputed. The p-value is ``(1 + #{T* >= T}) / (B + 1)``.
    """
    loss = loss or LossSpec("square")
    if loss.kind != "square":
        raise UsageError("parity_test is defined for the square loss only")
    _check_B(B, True)
    if data.n < 3:
        raise UsageError(f"parity_test needs at least 3 rows; got {data.n}")
    method = resolve_method(data, partition, method)
    outcome = partition.outcome
    full = fitter.fit(data, outcome)
    statistic = estimate_reliance(data, full, loss, partition, method).normalized
    restricted = fitter.without(partition.x1).fit(data, outcome)
    g = restricted.predict_data(data)
    y = data[outcome].astype(np.float64)
    scheme = "bernoulli" if fitter.kind == "logistic" else "wild_rademacher"
    rng = np.random.default_rng(seed)
    draws = np.empty(B)
    redrawn = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for b in range(B):
            for _ in range(MAX_REDRAWS):
                if scheme == "bernoulli":
                    y_star = (rng.random(data.n) < np.clip(g, 0.0, 1.0)).astype(np.int64)
                else:
                    y_star = g + (y - g) * rng.choice((-1.0, 1.0), size=data.n)
                try:
                    sample = data.with_values(outcome, y_star)
                    f = fitter.fit(sample, outcome)
                    draws[b] = estimate_reliance(sample, f, loss, partition, method).normalized
                except RelianceError:
                    redrawn += 1
                    continue
                break
            else:
                raise NumericalError(f"parity_test: {MAX_REDRAWS} consecutive unusable null resamples")
    p_value = (1.0 + np.count_nonzero(draws >= statistic)) / (B + 1.0)
    return ParityResult(float(statistic), float(p_value), B, seed, scheme, draws, redrawn)
