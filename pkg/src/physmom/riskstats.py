"""Summary statistics and reward-risk measures for per-period return series (percent units)."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ComputeError


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std_dev: float
    skewness: float
    kurtosis: float  # excess
    fin_wealth: float  # sum of decimal returns
    n: int
    degenerate: bool = False


@dataclass(frozen=True)
class RiskMeasures:
    sharpe: float
    var95: float
    cvar95: float
    mdd: float


def _series(returns) -> np.ndarray:
    x = np.asarray(returns, dtype=float)
    if x.ndim != 1:
        raise ValueError("returns must be 1-D")
    if not np.all(np.isfinite(x)):
        raise ComputeError("returns contain non-finite values")
    return x


def summary(returns) -> SummaryStats:
    """Sample mean/std (n-1); skewness and excess kurtosis from biased central moments."""
    x = _series(returns)
    n = x.size
    if n < 2:
        raise ComputeError("summary needs at least 2 observations")
    total = float(np.sum(x))
    mean = total / n
    d = x - mean
    m2 = float(np.sum(d * d)) / n
    std = math.sqrt(m2 * n / (n - 1))
    if m2 == 0.0 or np.all(x == x[0]):
        return SummaryStats(mean, 0.0, 0.0, 0.0, total / 100.0, n, degenerate=True)
    m3 = float(np.sum(d ** 3)) / n
    m4 = float(np.sum(d ** 4)) / n
    return SummaryStats(mean, std, m3 / m2 ** 1.5, m4 / (m2 * m2) - 3.0, total / 100.0, n)


def sharpe(returns) -> float:
    """Mean over sample std at the native frequency; the risk-free rate is taken as zero."""
    s = summary(returns)
    if s.degenerate or s.std_dev == 0.0:
        raise ComputeError("Sharpe ratio undefined for zero volatility")
    return s.mean / s.std_dev


def _tail_index(n: int, level: float) -> int:
    # 1-based order statistic ceil((1-level) n); the epsilon absorbs 1-0.95 != 0.05
    k = math.ceil((1.0 - level) * n - 1e-9)
    return min(max(k, 1), n)


def var_cvar(returns, level: float = 0.95) -> tuple[float, float]:
    """Historical VaR and CVaR as positive loss magnitudes (negative means a gain)."""
    x = _series(returns)
    if x.size == 0:
        raise ComputeError("VaR of an empty series")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    if x.size < 20:
        warnings.warn(f"VaR from only {x.size} observations", RuntimeWarning, stacklevel=2)
    k = _tail_index(x.size, level)
    q = float(np.partition(x, k - 1)[k - 1])
    tail = x[x <= q]
    return -q, -float(np.mean(tail))


def max_drawdown(returns) -> float:
    """Largest peak-to-trough fall (%) of the compounded equity curve starting at 1."""
    x = _series(returns)
    if x.size == 0:
        raise ComputeError("drawdown of an empty series")
    equity = np.concatenate(([1.0], np.cumprod(1.0 + x / 100.0)))
    peak = np.maximum.accumulate(equity)
    return float(np.max((peak - equity) / peak) * 100.0)


def risk_measures(returns, level: float = 0.95) -> RiskMeasures:
    x = _series(returns)
    try:
        sr = sharpe(x)
    except ComputeError:
        sr = float("nan")
    var, cvar = var_cvar(x, level)
    return RiskMeasures(sr, var, cvar, max_drawdown(x))
