"""Seeded synthetic equity markets for tests and demos.

The generator produces a bar panel with listings, delistings, index exits and
trading halts, plus weekly factor rows dated on the period-end rebalance dates
so regressions can be exercised end to end. It is a fixture, not a model of
any real market.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .marketdata import FactorRow, Panel, UniverseCalendar, rebalance_dates


@dataclass
class SyntheticMarket:
    panel: Panel
    calendar: UniverseCalendar
    factors: list[FactorRow]


def business_days(start: str, n_days: int, rng: np.random.Generator, holiday_rate: float = 0.02) -> np.ndarray:
    days = np.busday_offset(np.datetime64(start, "D"), np.arange(int(n_days * (1 + 2 * holiday_rate)) + 10), roll="forward")
    keep = rng.random(days.size) >= holiday_rate
    return days[keep][:n_days]


def _tickers(n: int) -> list[str]:
    width = len(str(n - 1))
    return [f"S{i:0{width}d}" for i in range(n)]


def generate_market(
    seed: int,
    n_securities: int = 50,
    n_days: int = 504,
    start: str = "2003-01-06",
    churn: bool = True,
    halt_rate: float = 0.01,
    frequency: str = "weekly",
) -> SyntheticMarket:
    rng = np.random.default_rng(seed)
    days = business_days(start, n_days, rng)
    T, N = days.size, n_securities

    f_mkt = rng.normal(0.0003, 0.011, T)
    f_smb = rng.normal(0.0, 0.005, T)
    f_hml = rng.normal(0.0, 0.005, T)
    beta = rng.normal(1.0, 0.3, N)
    s_load = rng.normal(0.0, 0.5, N)
    h_load = rng.normal(0.0, 0.5, N)
    idio = rng.normal(0.0, 1.0, (T, N)) * rng.uniform(0.008, 0.03, N)
    log_ret = f_mkt[:, None] * beta + f_smb[:, None] * s_load + f_hml[:, None] * h_load + idio
    log_ret[0] = 0.0
    close = rng.uniform(5.0, 200.0, N) * np.exp(np.cumsum(log_ret, axis=0))

    shares = np.round(rng.uniform(1e7, 1e9, N))
    turnover = np.exp(rng.normal(np.log(rng.uniform(0.001, 0.02, N)), 0.5, (T, N)))
    volume = np.round(turnover * shares)
    traded_value = volume * close * rng.uniform(0.98, 1.02, (T, N))
    market_cap = close * shares

    alive = np.ones((T, N), dtype=bool)
    spans = {}
    tickers = _tickers(N)
    for j, t in enumerate(tickers):
        first, last = 0, T - 1
        if churn:
            u = rng.random()
            if u < 0.15:
                first = int(rng.integers(1, T // 2))
            elif u < 0.3:
                last = int(rng.integers(T // 2, T - 1))
        alive[:first, j] = False
        alive[last + 1:, j] = False
        start_m, end_m = days[first].item(), days[last].item()
        if churn and rng.random() < 0.1:
            # leaves the index a while before its last bar
            end_m = days[max(first, last - int(rng.integers(5, 60)))].item()
        spans[t] = ((start_m, None if last == T - 1 and end_m == days[-1].item() else end_m),)
    halted = rng.random((T, N)) < halt_rate
    alive &= ~halted

    def mask(a):
        return np.where(alive, a, np.nan)

    panel = Panel(days, tickers, mask(close), mask(volume), mask(np.broadcast_to(shares, (T, N))),
                  mask(traded_value), mask(market_cap))
    calendar = UniverseCalendar(spans, panel.dates)
    factors = period_factors(calendar, frequency, f_mkt, f_smb, f_hml, rf=0.02)
    return SyntheticMarket(panel, calendar, factors)


def period_factors(calendar: UniverseCalendar, frequency: str, f_mkt, f_smb, f_hml, rf: float) -> list[FactorRow]:
    """Aggregate daily log factor moves into percent returns between consecutive rebalance dates."""
    days = calendar.trading_days
    formations = rebalance_dates(calendar, frequency)
    rows = np.searchsorted(days, formations)
    out = []
    for a, b in zip(rows[:-1], rows[1:]):
        seg = slice(a + 1, b + 1)
        mkt = (np.expm1(np.sum(f_mkt[seg]))) * 100.0 - rf
        smb = np.expm1(np.sum(f_smb[seg])) * 100.0
        hml = np.expm1(np.sum(f_hml[seg])) * 100.0
        out.append(FactorRow(days[b].item(), float(mkt), float(smb), float(hml), rf))
    return out


def mean_reverting_market(n_pairs: int = 20, n_days: int = 400, seed: int = 0, start: str = "2003-01-06") -> SyntheticMarket:
    """Daily returns alternate in sign for every security (period 2).

    "Up-drift" names gain 2a then lose a, but trade heavily on their down days;
    "down-drift" names mirror that. Turnover-weighted momentum therefore ranks
    the rising names as losers and the falling names as winners, so buying the
    losers and shorting the winners earns a positive return every period.
    """
    rng = np.random.default_rng(seed)
    days = np.busday_offset(np.datetime64(start, "D"), np.arange(n_days), roll="forward")
    T, N = days.size, 2 * n_pairs
    amp = rng.uniform(0.002, 0.01, N)
    up = np.arange(N) < n_pairs
    parity = (np.arange(T) % 2 == 0)[:, None]
    big = np.where(up, 2.0, -2.0) * amp
    small = np.where(up, -1.0, 1.0) * amp
    log_ret = np.where(parity, big, small)
    log_ret[0] = 0.0
    close = 50.0 * np.exp(np.cumsum(log_ret, axis=0))
    shares = np.full(N, 1e8)
    # heavy trading on odd days: the down days of up-drift names, the up days of down-drift names
    heavy = np.broadcast_to(~parity, (T, N))
    turnover = np.where(heavy, 0.05, 0.001) * rng.uniform(0.9, 1.1, (T, N))
    volume = turnover * shares
    traded_value = volume * close
    market_cap = close * shares
    tickers = _tickers(N)
    panel = Panel(days, tickers, close, volume, np.broadcast_to(shares, (T, N)), traded_value, market_cap)
    calendar = UniverseCalendar({t: ((days[0].item(), None),) for t in tickers}, panel.dates)
    return SyntheticMarket(panel, calendar, [])


def write_dataset(market: SyntheticMarket, out_dir) -> dict[str, Path]:
    """Write bars.csv, membership.csv and factors.csv; floats use round-trip repr."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = market.panel
    paths = {"bars": out / "bars.csv", "membership": out / "membership.csv", "factors": out / "factors.csv"}
    with paths["bars"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "ticker", "close", "volume", "shares_out", "traded_value", "market_cap"])
        for i, d in enumerate(p.dates.tolist()):
            for j in np.flatnonzero(p.has_bar[i]):
                w.writerow([d.isoformat(), p.tickers[j], repr(float(p.close[i, j])), repr(float(p.volume[i, j])),
                            repr(float(p.shares_out[i, j])), repr(float(p.traded_value[i, j])),
                            repr(float(p.market_cap[i, j]))])
    with paths["membership"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", "start_date", "end_date"])
        for t in sorted(market.calendar.memberships):
            for s, e in market.calendar.memberships[t]:
                w.writerow([t, s.isoformat(), "" if e is None else e.isoformat()])
    with paths["factors"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "mkt", "smb", "hml", "rf"])
        for f in market.factors:
            w.writerow([f.date.isoformat(), repr(f.mkt), repr(f.smb), repr(f.hml), repr(f.rf)])
    return paths
