"""Ranked baskets, overlapping long-short cohorts and strategy return series.

Holding period k of a cohort formed on rebalance date F[i] runs from the close
of F[i+k-1] to the close of F[i+k]. Each leg is an equal-weight buy-and-hold
basket entered at the formation close, so its period-k return is the change in
basket value between consecutive period ends. All returns are in percent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ComputeError, ConfigError, EmptyRankingError
from .marketdata import Panel, UniverseCalendar, lookback_rows, rebalance_dates, to_day
from .momentum import CriterionSpec, ScoreRow, window_scores

log = logging.getLogger(__name__)


class Mode(str, Enum):
    MOMENTUM = "momentum"
    CONTRARIAN = "contrarian"


@dataclass(frozen=True)
class StrategySpec:
    J: int
    K: int
    criterion: CriterionSpec
    mode: Mode = Mode.CONTRARIAN
    n_groups: int = 10
    cost_winner: float = 0.0
    cost_loser: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.J < 1 or self.K < 1:
            raise ConfigError(f"J and K must be >= 1, got J={self.J}, K={self.K}")
        if self.n_groups < 2:
            raise ConfigError(f"n_groups must be >= 2, got {self.n_groups}")
        if self.cost_winner < 0 or self.cost_loser < 0:
            raise ConfigError("transaction costs must be >= 0")
        self.criterion.check()

    @property
    def cost(self) -> float:
        return self.cost_winner + self.cost_loser


@dataclass(frozen=True)
class RankedBaskets:
    formation: np.datetime64
    groups: tuple[tuple[str, ...], ...]

    @property
    def loser(self) -> tuple[str, ...]:
        return self.groups[0]

    @property
    def winner(self) -> tuple[str, ...]:
        return self.groups[-1]


def group_sizes(n: int, n_groups: int) -> list[int]:
    """Near-equal sizes; the remainder goes to the lowest groups."""
    q, r = divmod(n, n_groups)
    return [q + 1 if g < r else q for g in range(n_groups)]


def _split(order: Sequence, n_groups: int) -> list:
    out, pos = [], 0
    for size in group_sizes(len(order), n_groups):
        out.append(order[pos:pos + size])
        pos += size
    return out


def rank_baskets(scores: Sequence[ScoreRow], n_groups: int = 10) -> RankedBaskets:
    """Sort ascending by score (ties by ticker) and cut into groups R1 (lowest) .. Rn."""
    if n_groups < 2:
        raise ValueError("n_groups must be >= 2")
    if len(scores) < n_groups:
        raise EmptyRankingError(f"{len(scores)} scored securities cannot fill {n_groups} groups")
    formations = {str(r.formation) for r in scores}
    if len(formations) > 1:
        raise ValueError("scores span more than one formation date")
    ordered = sorted(scores, key=lambda r: (r.score, r.security))
    groups = tuple(tuple(r.security for r in g) for g in _split(ordered, n_groups))
    return RankedBaskets(scores[0].formation, groups)


def cost_adjust(r_gross: float, c_w: float, c_l: float) -> float:
    if c_w < 0 or c_l < 0:
        raise ValueError("transaction costs must be >= 0")
    return r_gross - (c_w + c_l)


def _basket_growth(panel: Panel, cols: np.ndarray, start_row: int, end_rows: np.ndarray):
    """Per-member price relatives from the first bar >= start_row to the last bar <= each end row.

    Returns ``(relatives, filled)`` shaped ``(len(end_rows), len(cols))``; unfilled
    members (no bar in ``[start_row, end]``) get a relative of exactly 1.
    """
    entry = panel.next_row[start_row, cols] if start_row < panel.n_days else np.full(cols.size, panel.n_days)
    exits = panel.prev_row[end_rows][:, cols]
    filled = entry[None, :] <= end_rows[:, None]
    safe_entry = np.where(entry < panel.n_days, entry, 0)
    p_in = panel.close[safe_entry, cols]
    p_out = panel.close[np.where(filled, exits, safe_entry[None, :]), cols[None, :]]
    rel = np.where(filled, p_out / p_in, 1.0)
    return rel, filled


def basket_period_return(basket, panel: Panel, period_start, period_end) -> float:
    """Equal-weight return (%) of ``basket`` from its first close on/after ``period_start``
    to its last close on/before ``period_end``. Members that never trade in between count as 0%."""
    if not basket:
        raise ValueError("empty basket")
    cols = np.array(sorted(panel.column(t) for t in basket), dtype=int)
    start = int(np.searchsorted(panel.dates, to_day(period_start), "left"))
    end = int(np.searchsorted(panel.dates, to_day(period_end), "right")) - 1
    if end < 0:
        rel, filled = np.ones((1, cols.size)), np.zeros((1, cols.size), dtype=bool)
    else:
        rel, filled = _basket_growth(panel, cols, start, np.array([end]))
    for c in cols[~filled[0]]:
        log.info("unfilled position %s in [%s, %s]", panel.tickers[c], period_start, period_end)
    return float(np.mean(rel[0] - 1.0) * 100.0)


@dataclass
class CohortLedger:
    formation: np.datetime64
    winner: tuple[str, ...]
    loser: tuple[str, ...]
    r_winner: np.ndarray
    r_loser: np.ndarray
    liquidation: np.datetime64
    truncated: bool
    groups: tuple[tuple[str, ...], ...] = ()
    audit: list = field(default_factory=list, repr=False)

    def weights(self, mode: Mode | str = Mode.MOMENTUM) -> dict[str, float]:
        """Signed formation weights: the long leg sums to +1, the short leg to -1."""
        long, short = (self.winner, self.loser) if Mode(mode) is Mode.MOMENTUM else (self.loser, self.winner)
        w = {t: 1.0 / len(long) for t in long}
        for t in short:
            w[t] = w.get(t, 0.0) - 1.0 / len(short)
        return w


@dataclass
class StrategySeries:
    dates: np.ndarray
    r_pi: np.ndarray
    r_impl: np.ndarray
    r_abs: np.ndarray
    live_cohorts: np.ndarray
    r_winner: np.ndarray
    r_loser: np.ndarray


def _leg_returns(rel: np.ndarray) -> np.ndarray:
    value = 1.0 + np.mean(rel - 1.0, axis=1)
    prev = np.concatenate(([1.0], value[:-1]))
    return (value / prev - 1.0) * 100.0


def _audit_rows(panel, formation, side, cols, start_row, end_rows, filled):
    rows = []
    entry = panel.next_row[start_row, cols]
    for j, c in enumerate(cols):
        t = panel.tickers[c]
        prev_px = None
        for k in range(end_rows.size):
            if not filled[k, j]:
                rows.append((formation, side, t, None, None, k + 1, 0.0))
                continue
            entry_px = prev_px if prev_px is not None else panel.close[entry[j], c]
            exit_px = panel.close[panel.prev_row[end_rows[k], c], c]
            rows.append((formation, side, t, entry_px, exit_px, k + 1, (exit_px / entry_px - 1.0) * 100.0))
            prev_px = exit_px
    return rows


def run_strategy(
    spec: StrategySpec,
    panel: Panel,
    cal: UniverseCalendar,
    frequency: str = "weekly",
    audit: bool = False,
) -> tuple[StrategySeries, list[CohortLedger]]:
    """Open a cohort at every formation date and average live cohorts per period."""
    formations = rebalance_dates(cal, frequency)
    frow = np.searchsorted(panel.dates, formations)
    if np.any(frow >= panel.n_days) or np.any(panel.dates[np.minimum(frow, panel.n_days - 1)] != formations):
        raise ComputeError("calendar trading days do not match the bar panel")
    member = cal.member_matrix(panel.tickers, formations)
    n_periods = formations.size - 1
    sign = 1.0 if spec.mode is Mode.MOMENTUM else -1.0
    charge = spec.cost / spec.K

    per_period: list[list[tuple[float, float]]] = [[] for _ in range(max(n_periods, 0))]
    cohorts: list[CohortLedger] = []
    for i in range(spec.J, n_periods):
        lo, hi = lookback_rows(panel, formations, i, spec.J)
        counts = panel.has_bar[lo:hi].sum(axis=0)
        cols = np.flatnonzero(member[i] & (counts >= 2))
        if cols.size < spec.n_groups:
            log.info("%s: %d eligible securities, skipping", formations[i], cols.size)
            continue
        score, _, ok = window_scores(panel, lo, hi, cols, spec.criterion)
        cols, score = cols[ok], score[ok]
        if cols.size < spec.n_groups:
            log.info("%s: %d defined scores, skipping", formations[i], cols.size)
            continue
        order = cols[np.lexsort((cols, score))]
        groups = _split(order, spec.n_groups)
        last = min(i + spec.K, n_periods)
        end_rows = frow[i + 1:last + 1]
        legs = {}
        audit_rows = []
        for side, members in (("W", np.sort(groups[-1])), ("L", np.sort(groups[0]))):
            rel, filled = _basket_growth(panel, members, frow[i], end_rows)
            if not filled.all():
                log.info("%s: %d unfilled %s positions", formations[i], int((~filled).sum()), side)
            legs[side] = _leg_returns(rel)
            if audit:
                audit_rows += _audit_rows(panel, formations[i], side, members, frow[i], end_rows, filled)
        for k in range(end_rows.size):
            per_period[i + k].append((float(legs["W"][k]), float(legs["L"][k])))
        cohorts.append(
            CohortLedger(
                formation=formations[i],
                winner=tuple(panel.tickers[c] for c in groups[-1]),
                loser=tuple(panel.tickers[c] for c in groups[0]),
                r_winner=legs["W"],
                r_loser=legs["L"],
                liquidation=formations[last],
                truncated=i + spec.K > n_periods,
                groups=tuple(tuple(panel.tickers[c] for c in g) for g in groups),
                audit=audit_rows,
            )
        )
    if not cohorts:
        raise ComputeError(f"no formable cohort for {spec.criterion.slug} (J={spec.J}, n_groups={spec.n_groups})")

    dates, r_pi, r_impl, r_abs, live, r_w, r_l = [], [], [], [], [], [], []
    for t, pairs in enumerate(per_period):
        if not pairs:
            continue
        n = len(pairs)
        legs = [sign * (w - l) for w, l in pairs]
        dates.append(formations[t + 1])
        live.append(n)
        r_pi.append(sum(legs) / n)
        r_impl.append(sum(g - charge for g in legs) / n)
        r_abs.append(sum(abs(w - l) - charge for w, l in pairs) / n)
        r_w.append(sum(w for w, _ in pairs) / n)
        r_l.append(sum(l for _, l in pairs) / n)
    series = StrategySeries(
        np.array(dates, dtype="datetime64[D]"),
        np.array(r_pi), np.array(r_impl), np.array(r_abs),
        np.array(live, dtype=int), np.array(r_w), np.array(r_l),
    )
    return series, cohorts
