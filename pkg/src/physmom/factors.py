"""Three-factor (MKT, SMB, HML) OLS attribution with classical standard errors."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import ComputeError
from .marketdata import FactorRow, to_day

MIN_OBSERVATIONS = 8


class Sig(str, Enum):
    NONE = "none"
    FIVE = "5pct"
    ONE = "1pct"

    @property
    def stars(self) -> str:
        return {"none": "", "5pct": "*", "1pct": "**"}[self.value]


@dataclass(frozen=True)
class PairedSample:
    dates: np.ndarray
    y: np.ndarray
    X: np.ndarray  # columns mkt, smb, hml

    @property
    def n(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class RegressionResult:
    alpha: float
    beta_mkt: float
    beta_smb: float
    beta_hml: float
    std_errors: tuple[float, float, float, float]
    t_stats: tuple[float, float, float, float]
    p_values: tuple[float, float, float, float]
    sig_flags: tuple[Sig, Sig, Sig, Sig]
    r2: float
    n: int

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.alpha, self.beta_mkt, self.beta_smb, self.beta_hml])

    @property
    def residual_df(self) -> int:
        return self.n - 4


def align(dates, returns, factors: Sequence[FactorRow], long_short: bool) -> PairedSample:
    """Inner-join a return series with factor rows on date.

    Long-only legs become excess returns (minus rf); long-short series are
    self-financing and are used as-is.
    """
    dates = np.asarray([to_day(d) for d in dates], dtype="datetime64[D]")
    returns = np.asarray(returns, dtype=float)
    if dates.shape != returns.shape:
        raise ValueError("dates and returns differ in length")
    by_date = {np.datetime64(f.date, "D"): f for f in factors}
    keep = [i for i, d in enumerate(dates) if d in by_date]
    if len(keep) < MIN_OBSERVATIONS:
        raise ComputeError(f"only {len(keep)} dates overlap the factor data (need {MIN_OBSERVATIONS})")
    rows = [by_date[dates[i]] for i in keep]
    y = returns[keep]
    if not long_short:
        y = y - np.array([f.rf for f in rows])
    X = np.array([[f.mkt, f.smb, f.hml] for f in rows])
    return PairedSample(dates[keep], y, X)


def _flag(p: float) -> Sig:
    if p < 0.01:
        return Sig.ONE
    if p < 0.05:
        return Sig.FIVE
    return Sig.NONE


def ols3(y, X) -> RegressionResult:
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n = y.size
    if X.shape != (n, 3):
        raise ValueError(f"X must be ({n}, 3), got {X.shape}")
    if n <= 4:
        raise ComputeError(f"need more than 4 observations, got {n}")
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        raise ComputeError("dependent variable has zero variance")
    Z = np.column_stack([np.ones(n), X])
    if np.linalg.matrix_rank(Z) < 4:
        raise ComputeError("design matrix is rank deficient")

    Q, R = np.linalg.qr(Z)
    beta = np.linalg.solve(R, Q.T @ y)
    resid = y - Z @ beta
    ssr = float(resid @ resid)
    df = n - 4
    r_inv = np.linalg.inv(R)
    se = np.sqrt(ssr / df * np.sum(r_inv * r_inv, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    p = 2.0 * stats.t.sf(np.abs(t), df)
    r2 = min(max(1.0 - ssr / sst, 0.0), 1.0)
    return RegressionResult(
        *(float(b) for b in beta),
        std_errors=tuple(float(s) for s in se),
        t_stats=tuple(float(v) for v in t),
        p_values=tuple(float(v) for v in p),
        sig_flags=tuple(_flag(v) for v in p),
        r2=r2,
        n=n,
    )
