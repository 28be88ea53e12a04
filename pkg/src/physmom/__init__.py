"""Cross-sectional momentum/contrarian backtesting with physical-momentum ranking criteria."""

__version__ = "0.1.0"

from .errors import ComputeError, ConfigError, DataError, PhysMomError
from .marketdata import (DailyBar, FactorRow, Panel, UniverseCalendar, calendar_from_panel, eligible_universe,
                         load_bars, load_factors, load_membership, rebalance_dates)
from .momentum import (STANDARD_CRITERIA, CriterionSpec, MassKind, ScoreRow, VelocityKind, compute_scores,
                       daily_mass, daily_velocity, parse_criterion, score_p0, score_p1, score_p2, score_p3)
from .portfolio import (CohortLedger, Mode, RankedBaskets, StrategySeries, StrategySpec, basket_period_return,
                        cost_adjust, rank_baskets, run_strategy)
from .riskstats import RiskMeasures, SummaryStats, max_drawdown, sharpe, summary, var_cvar
from .factors import RegressionResult, Sig, align, ols3
