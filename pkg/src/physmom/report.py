"""Table-shaped rows and CSV writers for run outputs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .factors import RegressionResult, align, ols3
from .marketdata import FactorRow
from .portfolio import CohortLedger, Mode, StrategySeries
from .riskstats import RiskMeasures, SummaryStats, risk_measures, summary

SUMMARY_COLUMNS = ("criterion", "basket", "mean", "std", "skew", "kurt", "fin_wealth",
                   "sharpe", "var95", "cvar95", "mdd")
REGRESSION_COLUMNS = ("criterion", "basket", "alpha", "alpha_sig", "beta_mkt", "mkt_sig",
                      "beta_smb", "smb_sig", "beta_hml", "hml_sig", "r2")
AUDIT_COLUMNS = ("formation", "side", "ticker", "entry_px", "exit_px", "period", "return_pct")


def fmt(x: float | None) -> str:
    if x is None:
        return ""
    if math.isnan(x):
        return "nan"
    s = f"{x:.4f}"
    return "0.0000" if s == "-0.0000" else s


def basket_series(series: StrategySeries, mode: Mode | str) -> list[tuple[str, np.ndarray, bool]]:
    """(label, returns, is_long_short) for the winner, loser and long-short rows."""
    ls_label = "W-L" if Mode(mode) is Mode.MOMENTUM else "L-W"
    return [("W", series.r_winner, False), ("L", series.r_loser, False), (ls_label, series.r_pi, True)]


@dataclass(frozen=True)
class PerformanceRow:
    criterion: str
    basket: str
    stats: SummaryStats
    risk: RiskMeasures

    def cells(self) -> list[str]:
        s, r = self.stats, self.risk
        return [self.criterion, self.basket, *map(fmt, (s.mean, s.std_dev, s.skewness, s.kurtosis, s.fin_wealth,
                                                         r.sharpe, r.var95, r.cvar95, r.mdd))]


@dataclass(frozen=True)
class RegressionRow:
    criterion: str
    basket: str
    result: RegressionResult

    def cells(self) -> list[str]:
        r = self.result
        cells = [self.criterion, self.basket]
        for coef, flag in zip(r.coefficients, r.sig_flags):
            cells += [fmt(float(coef)), flag.stars]
        return cells + [fmt(r.r2)]


def performance_rows(criterion: str, series: StrategySeries, mode) -> list[PerformanceRow]:
    return [PerformanceRow(criterion, label, summary(x), risk_measures(x))
            for label, x, _ in basket_series(series, mode)]


def regression_rows(criterion: str, series: StrategySeries, mode, factors: Sequence[FactorRow]) -> list[RegressionRow]:
    rows = []
    for label, x, long_short in basket_series(series, mode):
        sample = align(series.dates, x, factors, long_short=long_short)
        rows.append(RegressionRow(criterion, label, ols3(sample.y, sample.X)))
    return rows


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_cumret(path, series: StrategySeries, mode) -> None:
    """Running sum of decimal returns per basket (the last row equals each row's fin_wealth)."""
    baskets = basket_series(series, mode)
    cum = [np.cumsum(x) / 100.0 for _, x, _ in baskets]
    rows = ([str(d)] + [fmt(float(c[i])) for c in cum] for i, d in enumerate(series.dates))
    write_rows(path, ["date"] + [label for label, _, _ in baskets], rows)


def write_audit(path, cohorts: Sequence[CohortLedger]) -> None:
    rows = ([str(f), side, t, fmt(e), fmt(x), k, fmt(r)]
            for c in cohorts for f, side, t, e, x, k, r in c.audit)
    write_rows(path, AUDIT_COLUMNS, rows)
