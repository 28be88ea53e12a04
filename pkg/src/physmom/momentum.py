"""Velocities, financial masses and the eleven physical-momentum ranking scores.

Velocity is the per-day return, either raw (``(S_t - S_{t-1})/S_{t-1}``) or log
(``ln(S_t/S_{t-1})``). Mass is a per-day liquidity proxy: share turnover
(volume / shares outstanding) or value fraction (traded value / market cap).
Score classes over a lookback window:

    p0  cumulative return, (S_last - S_first) / S_first
    p1  sum of mass * velocity
    p2  mass-weighted mean velocity
    p3  mean velocity / sample std of velocity (inverse-volatility mass)

Within a window, velocities run bar-to-bar over the bars a security actually
has, and the mass of day t multiplies the velocity ending on day t. All sums
accumulate in ascending date order so results are bitwise reproducible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, EmptyRankingError, UndefinedScoreError
from .marketdata import DailyBar, Panel, formation_index, lookback_rows, rebalance_dates, UniverseCalendar


class VelocityKind(str, Enum):
    RAW = "raw_r"
    LOG = "log_R"


class MassKind(str, Enum):
    UNIT = "unit"
    TURNOVER = "turnover_upsilon"
    VALUE = "value_tau"
    INV_SIGMA = "inv_sigma"


_VELOCITY_TOKENS = {"raw": VelocityKind.RAW, "log": VelocityKind.LOG}
_MASS_TOKENS = {
    "unit": MassKind.UNIT,
    "turnover": MassKind.TURNOVER,
    "value": MassKind.VALUE,
    "invvol": MassKind.INV_SIGMA,
}
_MASS_SYMBOL = {MassKind.UNIT: "1", MassKind.TURNOVER: "upsilon", MassKind.VALUE: "tau", MassKind.INV_SIGMA: "1/sigma"}


@dataclass(frozen=True)
class CriterionSpec:
    klass: str
    velocity: VelocityKind = VelocityKind.RAW
    mass: MassKind = MassKind.UNIT

    @property
    def slug(self) -> str:
        """Filesystem-safe, case-insensitive-safe name, e.g. ``p1_turnover_log``."""
        if self.klass == "p0":
            return "p0"
        mass = {v: k for k, v in _MASS_TOKENS.items()}[self.mass]
        vel = {v: k for k, v in _VELOCITY_TOKENS.items()}[self.velocity]
        return f"{self.klass}_{mass}_{vel}"

    @property
    def label(self) -> str:
        if self.klass == "p0":
            return "p0"
        v = "R" if self.velocity is VelocityKind.LOG else "r"
        return f"{self.klass}({_MASS_SYMBOL[self.mass]},{v})"

    @property
    def is_standard(self) -> bool:
        """One of the eleven criteria reported in the results tables."""
        return self in STANDARD_CRITERIA

    def problems(self) -> list[str]:
        """Reasons this combination cannot be computed (empty if it can)."""
        if self.klass not in ("p0", "p1", "p2", "p3"):
            return [f"unknown criterion class {self.klass!r}"]
        if self.klass == "p0":
            return [] if self.mass is MassKind.UNIT else ["p0 takes no mass"]
        if self.klass == "p3":
            return [] if self.mass is MassKind.INV_SIGMA else [f"p3 requires inverse-volatility mass, got {self.mass.value}"]
        if self.mass is MassKind.INV_SIGMA:
            return [f"inverse-volatility mass is only defined for p3, not {self.klass}"]
        return []

    def check(self) -> "CriterionSpec":
        issues = self.problems()
        if issues:
            raise ConfigError(f"illegal criterion {self.slug}: {'; '.join(issues)}")
        return self


P0 = CriterionSpec("p0")
P1_UNIT_LOG = CriterionSpec("p1", VelocityKind.LOG, MassKind.UNIT)

# order of the rows in the results tables
STANDARD_CRITERIA: tuple[CriterionSpec, ...] = (
    P0,
    *(
        CriterionSpec(k, v, m)
        for k in ("p1", "p2")
        for v in (VelocityKind.RAW, VelocityKind.LOG)
        for m in (MassKind.TURNOVER, MassKind.VALUE)
    ),
    CriterionSpec("p3", VelocityKind.RAW, MassKind.INV_SIGMA),
    CriterionSpec("p3", VelocityKind.LOG, MassKind.INV_SIGMA),
)


def parse_criterion(text: str) -> CriterionSpec:
    """Parse a slug such as ``p0`` or ``p2_value_log``. Legality is not checked here."""
    text = text.strip()
    if text == "p0":
        return P0
    parts = text.split("_")
    if len(parts) != 3 or parts[1] not in _MASS_TOKENS or parts[2] not in _VELOCITY_TOKENS:
        raise ConfigError(f"cannot parse criterion {text!r} (expected e.g. p0, p1_turnover_log, p3_invvol_raw)")
    return CriterionSpec(parts[0], _VELOCITY_TOKENS[parts[2]], _MASS_TOKENS[parts[1]])


@dataclass(frozen=True)
class ScoreRow:
    security: str
    formation: np.datetime64
    score: float
    n_obs: int


def daily_velocity(closes: Sequence[float], kind: VelocityKind) -> np.ndarray:
    closes = np.asarray(closes, dtype=float)
    if closes.ndim != 1 or closes.size < 2:
        raise ValueError("need at least 2 closes")
    if np.any(closes <= 0):
        raise ValueError("closes must be positive")
    return _velocity(closes[1:], closes[:-1], kind)


def _velocity(cur: np.ndarray, prev: np.ndarray, kind: VelocityKind) -> np.ndarray:
    if kind is VelocityKind.LOG:
        return np.log(cur / prev)
    return (cur - prev) / prev


def daily_mass(bar: DailyBar, kind: MassKind) -> float:
    if kind is MassKind.UNIT:
        return 1.0
    if kind is MassKind.TURNOVER:
        return bar.volume / bar.shares_outstanding
    if kind is MassKind.VALUE:
        return bar.traded_value / bar.market_cap
    raise ValueError("inverse volatility is a window statistic, not a daily mass")


def _seqsum(x: np.ndarray) -> np.ndarray:
    # ascending-order accumulation along axis 0; masked entries must already be 0.0
    if x.shape[0] == 0:
        return np.zeros(x.shape[1:])
    return np.cumsum(x, axis=0)[-1]


def _pair(masses, velocities) -> tuple[np.ndarray, np.ndarray]:
    m = np.asarray(masses, dtype=float)
    v = np.asarray(velocities, dtype=float)
    if m.shape != v.shape or m.ndim != 1:
        raise ValueError(f"masses and velocities must be 1-D of equal length, got {m.shape} and {v.shape}")
    if m.size < 1:
        raise ValueError("need at least one observation")
    return m, v


def score_p0(closes: Sequence[float]) -> float:
    closes = np.asarray(closes, dtype=float)
    if closes.size < 2:
        raise ValueError("need at least 2 closes")
    return float((closes[-1] - closes[0]) / closes[0])


def score_p1(masses, velocities) -> float:
    m, v = _pair(masses, velocities)
    return float(_seqsum(m * v))


def score_p2(masses, velocities) -> float:
    m, v = _pair(masses, velocities)
    total = _seqsum(m)
    if total == 0:
        raise UndefinedScoreError("total mass is zero")
    return float(_seqsum(m * v) / total)


def score_p3(velocities) -> float:
    v = np.asarray(velocities, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValueError("need at least 2 velocities")
    score, ok = _p3(v[:, None], np.ones((v.size, 1), dtype=bool))
    if not ok[0]:
        raise UndefinedScoreError("velocity standard deviation is zero")
    return float(score[0])


def _p3(v: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = mask.sum(axis=0)
    vz = np.where(mask, v, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = _seqsum(vz) / n
        dev = np.where(mask, v - mean, 0.0)
        sd = np.sqrt(_seqsum(dev * dev) / (n - 1))
        score = mean / sd
    # identical velocities have exactly zero dispersion even if rounding says otherwise
    hi = np.where(mask, v, -np.inf).max(axis=0, initial=-np.inf)
    lo = np.where(mask, v, np.inf).min(axis=0, initial=np.inf)
    ok = (n >= 2) & (hi > lo) & (sd > 0)
    return score, ok


def window_scores(panel: Panel, lo: int, hi: int, cols: np.ndarray, spec: CriterionSpec):
    """Scores of columns ``cols`` over panel rows ``[lo, hi)``.

    Returns ``(score, n_obs, defined)`` arrays aligned with ``cols``.
    """
    cols = np.asarray(cols, dtype=int)
    has = panel.has_bar[lo:hi][:, cols]
    n_obs = has.sum(axis=0)
    if spec.klass == "p0":
        first = panel.next_row[lo, cols]
        last = panel.prev_row[hi - 1, cols]
        ok = n_obs >= 2
        safe_first = np.where(ok, first, lo)
        safe_last = np.where(ok, last, lo)
        with np.errstate(invalid="ignore"):
            p_first = panel.close[safe_first, cols]
            score = (panel.close[safe_last, cols] - p_first) / p_first
        return score, n_obs, ok

    close = panel.close[lo:hi][:, cols]
    prev = panel.prev_row[lo:hi - 1][:, cols]  # last bar at or before the previous row
    vmask = has[1:] & (prev >= lo)
    prev_close = panel.close[np.where(vmask, prev, lo), cols[None, :]]
    with np.errstate(invalid="ignore", divide="ignore"):
        v = _velocity(close[1:], prev_close, spec.velocity)

    if spec.klass == "p3":
        score, ok = _p3(v, vmask)
        return score, n_obs, ok

    if spec.mass is MassKind.UNIT:
        m = np.ones_like(v)
    elif spec.mass is MassKind.TURNOVER:
        m = panel.volume[lo + 1:hi][:, cols] / panel.shares_out[lo + 1:hi][:, cols]
    else:
        m = panel.traded_value[lo + 1:hi][:, cols] / panel.market_cap[lo + 1:hi][:, cols]
    mv = _seqsum(np.where(vmask, m * v, 0.0))
    nv = vmask.sum(axis=0)
    if spec.klass == "p1":
        return mv, n_obs, nv >= 1
    total = _seqsum(np.where(vmask, m, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        score = mv / total
    return score, n_obs, (nv >= 1) & (total > 0)


def _formations(panel: Panel, cal: UniverseCalendar | None, frequency: str) -> np.ndarray:
    return rebalance_dates(cal if cal is not None else UniverseCalendar({}, panel.dates), frequency)


def compute_scores(
    panel: Panel,
    universe: Iterable[str],
    formation,
    J: int,
    spec: CriterionSpec,
    frequency: str = "weekly",
    cal: UniverseCalendar | None = None,
) -> list[ScoreRow]:
    """One :class:`ScoreRow` per security in ``universe`` with a defined score, in ticker order."""
    spec.check()
    formations = _formations(panel, cal, frequency)
    i = formation_index(formations, formation)
    lo, hi = lookback_rows(panel, formations, i, J)
    cols = np.array(sorted(panel.column(t) for t in universe), dtype=int)
    if cols.size == 0:
        raise EmptyRankingError(f"{formations[i]}: empty universe")
    score, n_obs, ok = window_scores(panel, lo, hi, cols, spec)
    rows = [
        ScoreRow(panel.tickers[c], formations[i], float(s), int(n))
        for c, s, n, good in zip(cols, score, n_obs, ok)
        if good and n >= 2
    ]
    if not rows:
        raise EmptyRankingError(f"{formations[i]}: no security has a defined {spec.slug} score")
    return rows


def write_scores_csv(path, rows: Iterable[ScoreRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["formation", "ticker", "score", "n_obs"])
        for r in rows:
            w.writerow([str(r.formation), r.security, repr(r.score), r.n_obs])
