"""Daily bar panels, point-in-time index membership and the rebalancing calendar.

Input files (UTF-8, ISO dates, ``.`` decimal separator):

    bars        date,ticker,close,volume,shares_out,traded_value,market_cap
    membership  ticker,start_date,end_date      (empty end_date = still a member)
    factors     date,mkt,smb,hml,rf             (percent per period)

A :class:`Panel` stores every field as a dense ``(n_days, n_securities)`` array
with NaN where a security has no bar. Columns are ordered by ticker, so column
order is also the tie-breaking order used when ranking.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, InsufficientHistoryError

BAR_COLUMNS = ("date", "ticker", "close", "volume", "shares_out", "traded_value", "market_cap")
MEMBERSHIP_COLUMNS = ("ticker", "start_date", "end_date")
FACTOR_COLUMNS = ("date", "mkt", "smb", "hml", "rf")

FREQUENCIES = ("weekly", "monthly")


@dataclass(frozen=True)
class DailyBar:
    date: dt.date
    close: float
    volume: float
    shares_outstanding: float
    traded_value: float
    market_cap: float


@dataclass(frozen=True)
class FactorRow:
    date: dt.date
    mkt: float
    smb: float
    hml: float
    rf: float


def to_day(value) -> np.datetime64:
    """Coerce a date-like value (str, date, datetime64) to ``datetime64[D]``."""
    if isinstance(value, np.datetime64):
        return value.astype("datetime64[D]")
    if isinstance(value, (dt.date, str)):
        return np.datetime64(value, "D")
    raise TypeError(f"not a date: {value!r}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class Panel:
    """Immutable security-by-day panel of daily bars."""

    def __init__(
        self,
        dates: np.ndarray,
        tickers: Sequence[str],
        close: np.ndarray,
        volume: np.ndarray,
        shares_out: np.ndarray,
        traded_value: np.ndarray,
        market_cap: np.ndarray,
    ):
        dates = np.asarray(dates, dtype="datetime64[D]")
        tickers = tuple(tickers)
        if list(tickers) != sorted(tickers) or len(set(tickers)) != len(tickers):
            raise DataError("tickers must be unique and sorted")
        if dates.size and np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise DataError("trading days must be strictly increasing")
        shape = (dates.size, len(tickers))
        fields = [np.array(a, dtype=float) for a in (close, volume, shares_out, traded_value, market_cap)]
        for a in fields:
            if a.shape != shape:
                raise DataError(f"field shape {a.shape} does not match {shape}")
        self.dates = _readonly(dates)
        self.tickers = tickers
        self.close, self.volume, self.shares_out, self.traded_value, self.market_cap = (
            _readonly(a) for a in fields
        )
        has_bar = ~np.isnan(self.close)
        self.has_bar = _readonly(has_bar)

        rows = np.arange(shape[0])[:, None]
        prev_row = np.where(has_bar, rows, -1)
        np.maximum.accumulate(prev_row, axis=0, out=prev_row)
        next_row = np.where(has_bar, rows, shape[0])
        next_row = np.minimum.accumulate(next_row[::-1], axis=0)[::-1].copy()
        # row of the last bar at or before t / first bar at or after t
        self.prev_row = _readonly(prev_row)
        self.next_row = _readonly(next_row)
        self._col = {t: j for j, t in enumerate(tickers)}

    @classmethod
    def from_bars(cls, bars: Mapping[str, Iterable[DailyBar]]) -> "Panel":
        """Build a panel from ``{ticker: [DailyBar, ...]}``; trading days are the union of bar dates."""
        tickers = sorted(bars)
        per_ticker = {t: list(bars[t]) for t in tickers}
        days = sorted({b.date for bs in per_ticker.values() for b in bs})
        index = {d: i for i, d in enumerate(days)}
        arrays = [np.full((len(days), len(tickers)), np.nan) for _ in range(5)]
        for j, t in enumerate(tickers):
            for b in per_ticker[t]:
                i = index[b.date]
                if not np.isnan(arrays[0][i, j]):
                    raise DataError(f"duplicate bar for ({t}, {b.date})")
                for a, v in zip(arrays, (b.close, b.volume, b.shares_outstanding, b.traded_value, b.market_cap)):
                    a[i, j] = v
        return cls(np.array(days, dtype="datetime64[D]"), tickers, *arrays)

    def __len__(self) -> int:
        return int(self.has_bar.sum())

    @property
    def n_days(self) -> int:
        return self.dates.size

    def column(self, ticker: str) -> int:
        return self._col[ticker]

    def row(self, day) -> int:
        """Row index of a trading day; raises KeyError if ``day`` is not one."""
        d = to_day(day)
        i = int(np.searchsorted(self.dates, d))
        if i >= self.dates.size or self.dates[i] != d:
            raise KeyError(f"{d} is not a trading day")
        return i

    def bar(self, ticker: str, day) -> DailyBar:
        i, j = self.row(day), self.column(ticker)
        if not self.has_bar[i, j]:
            raise KeyError(f"no bar for ({ticker}, {to_day(day)})")
        return DailyBar(
            self.dates[i].item(),
            float(self.close[i, j]),
            float(self.volume[i, j]),
            float(self.shares_out[i, j]),
            float(self.traded_value[i, j]),
            float(self.market_cap[i, j]),
        )

    def restrict(self, start=None, end=None) -> "Panel":
        """Sub-panel of trading days in ``[start, end]``; securities without bars are dropped."""
        lo = 0 if start is None else int(np.searchsorted(self.dates, to_day(start), "left"))
        hi = self.dates.size if end is None else int(np.searchsorted(self.dates, to_day(end), "right"))
        keep = self.has_bar[lo:hi].any(axis=0)
        cols = np.flatnonzero(keep)
        arrays = [a[lo:hi][:, cols] for a in (self.close, self.volume, self.shares_out, self.traded_value, self.market_cap)]
        return Panel(self.dates[lo:hi], [self.tickers[j] for j in cols], *arrays)


@dataclass(frozen=True)
class UniverseCalendar:
    """Index membership intervals (inclusive; ``None`` end = open) plus the trading-day grid."""

    memberships: Mapping[str, tuple[tuple[dt.date, dt.date | None], ...]]
    trading_days: np.ndarray

    def __post_init__(self):
        for ticker, spans in self.memberships.items():
            if not ticker:
                raise DataError("empty ticker in membership")
            ordered = sorted(spans, key=lambda s: s[0])
            for start, end in ordered:
                if end is not None and end < start:
                    raise DataError(f"{ticker}: membership end {end} before start {start}")
            for (s0, e0), (s1, _) in zip(ordered, ordered[1:]):
                if e0 is None or e0 >= s1:
                    raise DataError(f"{ticker}: overlapping membership intervals starting {s0} and {s1}")

    def is_member(self, ticker: str, day) -> bool:
        d = to_day(day).item()
        return any(s <= d and (e is None or d <= e) for s, e in self.memberships.get(ticker, ()))

    def member_mask(self, tickers: Sequence[str], day) -> np.ndarray:
        return self.member_matrix(tickers, np.array([to_day(day)]))[0]

    def member_matrix(self, tickers: Sequence[str], days) -> np.ndarray:
        """Boolean ``(len(days), len(tickers))`` membership table."""
        days = np.asarray(days, dtype="datetime64[D]")
        out = np.zeros((days.size, len(tickers)), dtype=bool)
        for j, t in enumerate(tickers):
            for start, end in self.memberships.get(t, ()):
                lo = np.searchsorted(days, np.datetime64(start, "D"), "left")
                hi = days.size if end is None else np.searchsorted(days, np.datetime64(end, "D"), "right")
                out[lo:hi, j] = True
        return out


def calendar_from_panel(panel: Panel) -> UniverseCalendar:
    """Membership = each security's first-to-last bar span (used when no membership file is given)."""
    spans = {}
    for j, t in enumerate(panel.tickers):
        rows = np.flatnonzero(panel.has_bar[:, j])
        if rows.size:
            spans[t] = ((panel.dates[rows[0]].item(), panel.dates[rows[-1]].item()),)
    return UniverseCalendar(spans, panel.dates)


def _parse_date(text: str, line: int, field: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise DataError(f"line {line}: bad {field} {text!r}") from None


def _parse_float(text: str, line: int, field: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise DataError(f"line {line}: bad {field} {text!r}") from None
    if not math.isfinite(x):
        raise DataError(f"line {line}: non-finite {field}")
    return x


def _open_csv(path, columns: Sequence[str]):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    fh = path.open(newline="", encoding="utf-8")
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != list(columns):
        fh.close()
        raise DataError(f"{path}: expected header {','.join(columns)}, got {header}")
    return fh, reader


def load_bars(path, volume_sanity_multiple: float = 10.0) -> Panel:
    """Parse a bars CSV into a :class:`Panel`. Any bad row fails the whole load."""
    fh, reader = _open_csv(path, BAR_COLUMNS)
    bars: dict[str, list[DailyBar]] = {}
    seen = set()
    with fh:
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(BAR_COLUMNS):
                raise DataError(f"line {line}: expected {len(BAR_COLUMNS)} fields, got {len(row)}")
            day = _parse_date(row[0], line, "date")
            ticker = row[1].strip()
            if not ticker:
                raise DataError(f"line {line}: empty ticker")
            close, volume, shares, value, mcap = (
                _parse_float(x, line, name) for x, name in zip(row[2:], BAR_COLUMNS[2:])
            )
            if close <= 0:
                raise DataError(f"line {line}: close must be > 0, got {close}")
            if shares <= 0 or mcap <= 0:
                raise DataError(f"line {line}: shares_out and market_cap must be > 0")
            if volume < 0 or value < 0:
                raise DataError(f"line {line}: volume and traded_value must be >= 0")
            if volume > shares * volume_sanity_multiple:
                raise DataError(f"line {line}: volume exceeds {volume_sanity_multiple} x shares_out")
            if (ticker, day) in seen:
                raise DataError(f"line {line}: duplicate bar for ({ticker}, {day})")
            seen.add((ticker, day))
            bars.setdefault(ticker, []).append(DailyBar(day, close, volume, shares, value, mcap))
    if not bars:
        raise DataError(f"{path}: no bars")
    return Panel.from_bars(bars)


def load_membership(path, trading_days) -> UniverseCalendar:
    fh, reader = _open_csv(path, MEMBERSHIP_COLUMNS)
    spans: dict[str, list] = {}
    with fh:
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"line {line}: expected 3 fields, got {len(row)}")
            ticker = row[0].strip()
            if not ticker:
                raise DataError(f"line {line}: empty ticker")
            start = _parse_date(row[1], line, "start_date")
            end = _parse_date(row[2], line, "end_date") if row[2].strip() else None
            spans.setdefault(ticker, []).append((start, end))
    return UniverseCalendar({t: tuple(sorted(s, key=lambda x: x[0])) for t, s in spans.items()},
                            np.asarray(trading_days, dtype="datetime64[D]"))


def load_factors(path) -> list[FactorRow]:
    fh, reader = _open_csv(path, FACTOR_COLUMNS)
    rows: list[FactorRow] = []
    with fh:
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 5:
                raise DataError(f"line {line}: expected 5 fields, got {len(row)}")
            day = _parse_date(row[0], line, "date")
            vals = [_parse_float(x, line, name) for x, name in zip(row[1:], FACTOR_COLUMNS[1:])]
            if rows and day <= rows[-1].date:
                raise DataError(f"line {line}: factor dates must be strictly increasing")
            rows.append(FactorRow(day, *vals))
    return rows


def rebalance_dates(cal: UniverseCalendar, frequency: str = "weekly") -> np.ndarray:
    """First trading day of each ISO week (weekly) or calendar month (monthly)."""
    days = np.asarray(cal.trading_days, dtype="datetime64[D]")
    if days.size == 0:
        raise DataError("empty trading calendar")
    if frequency == "weekly":
        keys = [d.isocalendar()[:2] for d in days.tolist()]
    elif frequency == "monthly":
        keys = [(d.year, d.month) for d in days.tolist()]
    else:
        raise ValueError(f"unknown frequency {frequency!r}")
    first = [0] + [i for i in range(1, len(keys)) if keys[i] != keys[i - 1]]
    return days[first]


def formation_index(formations: np.ndarray, formation) -> int:
    d = to_day(formation)
    i = int(np.searchsorted(formations, d))
    if i >= formations.size or formations[i] != d:
        raise ValueError(f"{d} is not a formation date")
    return i


def lookback_rows(panel: Panel, formations: np.ndarray, i: int, J: int) -> tuple[int, int]:
    """Panel row slice covering ``[formation[i-J], formation[i])``."""
    if J < 1:
        raise ValueError("J must be >= 1")
    if i < J:
        raise InsufficientHistoryError(
            f"formation {formations[i]} is fewer than {J} periods after the start of data"
        )
    lo = int(np.searchsorted(panel.dates, formations[i - J], "left"))
    hi = int(np.searchsorted(panel.dates, formations[i], "left"))
    return lo, hi


def eligible_mask(panel: Panel, cal: UniverseCalendar, formations: np.ndarray, i: int, J: int) -> np.ndarray:
    lo, hi = lookback_rows(panel, formations, i, J)
    counts = panel.has_bar[lo:hi].sum(axis=0)
    return cal.member_mask(panel.tickers, formations[i]) & (counts >= 2)


def eligible_universe(cal: UniverseCalendar, bars: Panel, formation, J: int, frequency: str = "weekly") -> frozenset[str]:
    """Index members at ``formation`` with at least two bars in the J-period lookback window."""
    formations = rebalance_dates(cal, frequency)
    i = formation_index(formations, formation)
    mask = eligible_mask(bars, cal, formations, i, J)
    return frozenset(t for t, m in zip(bars.tickers, mask) if m)
