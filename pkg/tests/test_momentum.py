import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from physmom.errors import ConfigError, EmptyRankingError, UndefinedScoreError
from physmom.marketdata import DailyBar, Panel, eligible_universe, lookback_rows, rebalance_dates
from physmom.momentum import (P0, P1_UNIT_LOG, STANDARD_CRITERIA, CriterionSpec, MassKind, VelocityKind, compute_scores,
                              daily_mass, daily_velocity, parse_criterion, score_p0, score_p1, score_p2, score_p3)

from conftest import full_calendar, make_panel
from oracles import cumulative_return_bruteforce

RAW, LOG = VelocityKind.RAW, VelocityKind.LOG


def _bar(volume=1e6, shares=1e8, value=5e6, mcap=1e9):
    return DailyBar(None, 10.0, volume, shares, value, mcap)


# velocities and masses

def test_flat_price_zero_velocity():
    for kind in (RAW, LOG):
        assert daily_velocity([100, 100], kind).tolist() == [0.0]


def test_velocity_examples():
    assert daily_velocity([100, 110], LOG)[0] == math.log(110 / 100)
    assert daily_velocity([100, 110], RAW)[0] == 0.1


def test_velocity_length_and_errors():
    assert daily_velocity([1, 2, 3, 4], RAW).shape == (3,)
    with pytest.raises(ValueError):
        daily_velocity([100], LOG)
    with pytest.raises(ValueError):
        daily_velocity([100, 0], LOG)


def test_mass_examples():
    assert daily_mass(_bar(), MassKind.TURNOVER) == 0.01
    assert daily_mass(_bar(), MassKind.VALUE) == 0.005
    assert daily_mass(_bar(volume=123.0), MassKind.UNIT) == 1.0
    with pytest.raises(ValueError):
        daily_mass(_bar(), MassKind.INV_SIGMA)


# scores

def test_p1_examples():
    assert score_p1([1, 1], [0.01, 0.02]) == 0.03
    assert score_p1([2, 0], [0.01, 5]) == 0.02
    with pytest.raises(ValueError):
        score_p1([1, 1, 1], [0.01, 0.02])


def test_p1_unit_log_is_log_cumulative_return():
    rng = np.random.default_rng(1)
    for _ in range(200):
        closes = 50 * np.exp(np.cumsum(rng.normal(0, 0.02, rng.integers(2, 60))))
        v = daily_velocity(closes, LOG)
        p1 = score_p1(np.ones_like(v), v)
        assert math.exp(p1) - 1 == pytest.approx(cumulative_return_bruteforce(closes), rel=1e-12, abs=1e-13)
        assert math.exp(p1) - 1 == pytest.approx(score_p0(closes), rel=1e-12, abs=1e-13)


def test_p2_examples():
    assert score_p2([1, 3], [0.0, 0.04]) == 0.03
    v = [0.01, -0.02, 0.035, 0.004]
    for c in (0.001, 1.0, 7.5):
        assert score_p2([c] * 4, v) == pytest.approx(np.mean(v), rel=1e-14)
    with pytest.raises(UndefinedScoreError):
        score_p2([0, 0], [0.01, 0.02])


def test_p2_against_exact_rationals():
    rng = np.random.default_rng(2)
    for _ in range(200):
        n = int(rng.integers(1, 80))
        m = rng.uniform(0, 0.05, n)
        v = rng.normal(0, 0.03, n)
        exact = sum(Fraction(a) * Fraction(b) for a, b in zip(m, v)) / sum(Fraction(a) for a in m)
        assert abs(score_p2(m, v) - float(exact)) <= 1e-12


def test_p3_examples():
    with pytest.raises(UndefinedScoreError):
        score_p3([0.01, 0.01, 0.01])
    # mean 0.01, sample sd sqrt(2 * 0.02**2) = 0.02*sqrt(2)
    assert score_p3([-0.01, 0.03]) == pytest.approx(1 / (2 * math.sqrt(2)), rel=1e-14)
    assert score_p3([-0.01, 0.03]) == pytest.approx(0.353553, abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-0.2, 0.2, allow_nan=False), min_size=2, max_size=40),
       st.floats(1e-3, 1e3))
def test_p3_scale_invariant(v, c):
    v = np.array(v)
    assume(np.std(v) > 1e-6)
    assert score_p3(v * c) == pytest.approx(score_p3(v), rel=1e-9, abs=1e-12)


def test_p0_examples():
    assert score_p0([100, 100, 100]) == 0.0
    assert score_p0([100, 121]) == 0.21


# criterion legality

def test_eleven_standard_criteria():
    assert len(STANDARD_CRITERIA) == 11
    assert len({c.slug for c in STANDARD_CRITERIA}) == 11
    for c in STANDARD_CRITERIA:
        assert c.problems() == []
        assert parse_criterion(c.slug) == c


@pytest.mark.parametrize("spec", [
    CriterionSpec("p3", LOG, MassKind.TURNOVER),
    CriterionSpec("p1", RAW, MassKind.INV_SIGMA),
    CriterionSpec("p0", RAW, MassKind.VALUE),
    CriterionSpec("p4", RAW, MassKind.UNIT),
])
def test_illegal_combinations(spec):
    with pytest.raises(ConfigError):
        spec.check()


def test_unit_mass_is_computable_but_not_standard():
    assert P1_UNIT_LOG.problems() == [] and not P1_UNIT_LOG.is_standard


def test_bad_slug():
    with pytest.raises(ConfigError):
        parse_criterion("p1_volume_log")


# compute_scores

def _random_panel(n, T=60, seed=0, constant_mass=False):
    rng = np.random.default_rng(seed)
    closes = {f"S{j:03d}": list(20 * np.exp(np.cumsum(rng.normal(0, 0.02, T)))) for j in range(n)}
    panel = make_panel(closes)
    if not constant_mass:
        vol = rng.uniform(1e5, 5e6, panel.close.shape)
        panel = Panel(panel.dates, panel.tickers, panel.close, vol, panel.shares_out, vol * panel.close, panel.market_cap)
    return panel


def test_two_hundred_rows():
    panel = _random_panel(200)
    F = rebalance_dates(full_calendar(panel))
    for spec in STANDARD_CRITERIA:
        assert len(compute_scores(panel, panel.tickers, F[6], 6, spec)) == 200


def _order(rows):
    return [r.security for r in sorted(rows, key=lambda r: (r.score, r.security))]


def test_p0_and_unit_log_p1_rank_identically(market):
    F = rebalance_dates(market.calendar)
    for f in F[6::5]:
        uni = eligible_universe(market.calendar, market.panel, f, 6)
        a = compute_scores(market.panel, uni, f, 6, P0, cal=market.calendar)
        b = compute_scores(market.panel, uni, f, 6, P1_UNIT_LOG, cal=market.calendar)
        assert _order(a) == _order(b)
        for x, y in zip(a, b):
            assert math.exp(y.score) - 1 == pytest.approx(x.score, rel=1e-12, abs=1e-14)


def test_constant_mass_p2_matches_unit_p1_ordering():
    panel = _random_panel(50, constant_mass=True)
    F = rebalance_dates(full_calendar(panel))
    p2 = compute_scores(panel, panel.tickers, F[6], 6, CriterionSpec("p2", RAW, MassKind.TURNOVER))
    p1 = compute_scores(panel, panel.tickers, F[6], 6, CriterionSpec("p1", RAW, MassKind.UNIT))
    assert _order(p2) == _order(p1)
    for a, b in zip(p2, p1):
        assert a.score == pytest.approx(b.score / (b.n_obs - 1), rel=1e-12)


def _scalar_score(panel, ticker, lo, hi, spec):
    rows = [t for t in range(lo, hi) if panel.has_bar[t, panel.column(ticker)]]
    closes = [panel.close[t, panel.column(ticker)] for t in rows]
    if spec.klass == "p0":
        return score_p0(closes)
    v = daily_velocity(closes, spec.velocity)
    if spec.klass == "p3":
        return score_p3(v)
    m = [daily_mass(panel.bar(ticker, panel.dates[t]), spec.mass) for t in rows[1:]]
    return score_p1(m, v) if spec.klass == "p1" else score_p2(m, v)


def test_vectorized_scores_equal_scalar_route(market):
    F = rebalance_dates(market.calendar)
    for i in (6, 20, 45):
        lo, hi = lookback_rows(market.panel, F, i, 6)
        uni = eligible_universe(market.calendar, market.panel, F[i], 6)
        for spec in STANDARD_CRITERIA + (P1_UNIT_LOG,):
            for row in compute_scores(market.panel, uni, F[i], 6, spec, cal=market.calendar):
                assert row.score == _scalar_score(market.panel, row.security, lo, hi, spec)
                assert row.n_obs >= 2 and math.isfinite(row.score)


def test_post_formation_data_is_ignored():
    panel = _random_panel(30, seed=4)
    F = rebalance_dates(full_calendar(panel))
    cut = panel.row(F[6])
    scrambled = {}
    for name in ("close", "volume", "traded_value"):
        a = getattr(panel, name).copy()
        a[cut:] *= 3.7
        scrambled[name] = a
    shifted = Panel(panel.dates, panel.tickers, scrambled["close"], scrambled["volume"], panel.shares_out,
                    scrambled["traded_value"], panel.market_cap)
    for spec in STANDARD_CRITERIA:
        assert compute_scores(panel, panel.tickers, F[6], 6, spec) == compute_scores(shifted, panel.tickers, F[6], 6, spec)


def test_input_order_does_not_matter():
    panel = _random_panel(25, seed=5)
    bars = {t: [panel.bar(t, d) for d in panel.dates] for t in panel.tickers}
    rng = np.random.default_rng(0)
    shuffled = {t: bars[t] for t in rng.permutation(panel.tickers)}
    other = Panel.from_bars(shuffled)
    F = rebalance_dates(full_calendar(panel))
    uni = list(rng.permutation(panel.tickers))
    for spec in STANDARD_CRITERIA:
        assert compute_scores(other, uni, F[6], 6, spec) == compute_scores(panel, panel.tickers, F[6], 6, spec)


def test_single_degenerate_security_cannot_be_ranked():
    panel = make_panel({"FLAT": [10.0] * 40})
    F = rebalance_dates(full_calendar(panel))
    with pytest.raises(EmptyRankingError):
        compute_scores(panel, ["FLAT"], F[6], 6, CriterionSpec("p3", LOG, MassKind.INV_SIGMA))


def test_degenerate_security_dropped_from_that_ranking_only():
    rng = np.random.default_rng(3)
    panel = make_panel({"FLAT": [10.0] * 40, "LIVE": list(10 + rng.normal(0, 0.1, 40))})
    F = rebalance_dates(full_calendar(panel))
    p3 = compute_scores(panel, panel.tickers, F[6], 6, CriterionSpec("p3", RAW, MassKind.INV_SIGMA))
    assert [r.security for r in p3] == ["LIVE"]
    assert len(compute_scores(panel, panel.tickers, F[6], 6, P0)) == 2


def test_illegal_spec_rejected_by_compute_scores():
    panel = _random_panel(3)
    F = rebalance_dates(full_calendar(panel))
    with pytest.raises(ConfigError):
        compute_scores(panel, panel.tickers, F[6], 6, CriterionSpec("p3", RAW, MassKind.VALUE))
