"""Acceptance criteria. Each test records a one-line detail; the summary hook in
conftest prints one PASS/FAIL line per criterion at the end of the session."""

import csv
import time
from pathlib import Path

import numpy as np
import pytest

from physmom.cli import main
from physmom.errors import ComputeError
from physmom.factors import ols3
from physmom.marketdata import load_bars, load_membership
from physmom.momentum import P0, P1_UNIT_LOG, STANDARD_CRITERIA, parse_criterion
from physmom.portfolio import Mode, StrategySpec, run_strategy
from physmom.report import REGRESSION_COLUMNS, SUMMARY_COLUMNS, performance_rows
from physmom.riskstats import max_drawdown, sharpe, summary, var_cvar
from physmom.synthetic import generate_market, mean_reverting_market, write_dataset

from oracles import max_drawdown_quadratic, moments, var_cvar_sorted

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    data = write_dataset(generate_market(2024, n_securities=120, n_days=600), tmp_path_factory.mktemp("acc_data"))
    out = tmp_path_factory.mktemp("acc_out")
    code = main(["--bars", str(data["bars"]), "--membership", str(data["membership"]),
                 "--factors", str(data["factors"]), "--out", str(out)])
    assert code == 0
    return data, out


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_ac1_monotone_criterion_equivalence(record_property):
    rng = np.random.default_rng(20240601)
    n_universes, mismatches, unformable = 120, 0, 0
    t0 = time.perf_counter()
    for _ in range(n_universes):
        m = generate_market(int(rng.integers(1 << 31)), n_securities=int(rng.integers(20, 201)),
                            n_days=int(rng.integers(252, 757)))
        try:
            a, ca = run_strategy(StrategySpec(6, 6, P0), m.panel, m.calendar)
        except ComputeError:
            with pytest.raises(ComputeError):
                run_strategy(StrategySpec(6, 6, P1_UNIT_LOG), m.panel, m.calendar)
            unformable += 1
            continue
        b, cb = run_strategy(StrategySpec(6, 6, P1_UNIT_LOG), m.panel, m.calendar)
        same = [c.groups for c in ca] == [c.groups for c in cb] and all(
            np.array_equal(getattr(a, f), getattr(b, f))
            for f in ("dates", "r_pi", "r_impl", "r_abs", "live_cohorts", "r_winner", "r_loser"))
        mismatches += not same
    elapsed = time.perf_counter() - t0
    record_property("detail", f"{n_universes} universes ({unformable} unformable), "
                              f"{mismatches} mismatches, {elapsed:.1f} s")
    assert unformable < n_universes // 10
    assert mismatches == 0
    assert elapsed < 60


def test_ac2_anti_symmetry(record_property):
    checked = 0
    for seed in (1, 2, 3):
        m = generate_market(seed, n_securities=100, n_days=504)
        for crit in STANDARD_CRITERIA:
            mom, _ = run_strategy(StrategySpec(6, 6, crit, Mode.MOMENTUM), m.panel, m.calendar)
            con, _ = run_strategy(StrategySpec(6, 6, crit, Mode.CONTRARIAN), m.panel, m.calendar)
            assert np.array_equal(con.dates, mom.dates)
            assert np.array_equal(con.r_pi, -mom.r_pi), crit.slug
            checked += con.r_pi.size
    record_property("detail", f"11 criteria x 3 datasets, {checked} periods exactly negated")


def _random_series(rng):
    n = int(rng.integers(50, 5001))
    scale = rng.uniform(0.1, 5)
    kind = rng.integers(3)
    if kind == 0:
        x = rng.normal(rng.uniform(-0.5, 0.5), scale, n)
    elif kind == 1:
        x = rng.standard_t(3, n) * scale
    else:
        x = (rng.lognormal(0, 0.8, n) - 1.3) * scale
    return np.maximum(x, -95.0)


def test_ac3_oracle_equivalence(record_property):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        x = _random_series(rng)
        s = summary(x)
        mean, std, skew, kurt = (float(v) for v in moments(x))
        var, cvar = var_cvar(x)
        ovar, ocvar = var_cvar_sorted(x)
        pairs = [(s.mean, mean), (s.std_dev, std), (s.skewness, skew), (s.kurtosis, kurt),
                 (sharpe(x), mean / std), (var, ovar), (cvar, ocvar),
                 (max_drawdown(x), max_drawdown_quadratic(x))]
        diff = max(abs(a - b) for a, b in pairs)
        worst = max(worst, diff)
        assert diff <= 1e-10, pairs
    record_property("detail", f"1000 series, worst absolute difference {worst:.2e}")


def test_ac4_ols_recovery(record_property):
    truth = np.array([0.5, 1.2, 0.3, -0.4])
    inside, joint = 0, 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        X = rng.normal(0, 1, (500, 3))
        y = truth[0] + X @ truth[1:] + rng.normal(0, 1, 500)
        r = ols3(y, X)
        ok = np.abs(r.coefficients - truth) < 3 * np.array(r.std_errors)
        inside += int(ok.sum())
        joint += bool(ok.all())
    X = np.random.default_rng(0).normal(0, 1, (500, 3))
    exact = ols3(2 + 3 * X[:, 0], X)
    rate = inside / 800
    record_property("detail", f"per-coefficient {rate:.2%} within 3 SE "
                              f"(all four at once in {joint}/200 trials), exact-fit R2 = {exact.r2!r}")
    assert rate >= 0.99
    assert abs(exact.r2 - 1.0) <= 1e-10


def test_ac5_directional_sanity(record_property):
    m = mean_reverting_market()
    crit = parse_criterion("p1_turnover_log")
    con, _ = run_strategy(StrategySpec(6, 6, crit, Mode.CONTRARIAN), m.panel, m.calendar, "weekly")
    mom, _ = run_strategy(StrategySpec(6, 6, crit, Mode.MOMENTUM), m.panel, m.calendar, "weekly")
    record_property("detail", f"contrarian mean {con.r_pi.mean():+.4f}, momentum mean {mom.r_pi.mean():+.4f}, "
                              f"{con.r_pi.size} periods")
    assert con.r_pi.mean() > 0 and mom.r_pi.mean() < 0
    assert np.all(con.r_pi > 0) and np.all(mom.r_pi < 0)


def test_ac6_structural_reproduction(default_run, record_property):
    _, out = default_run
    summary_rows = _read(out / "summary_stats.csv")
    reg_rows = _read(out / "ff_regression.csv")
    assert tuple(summary_rows[0]) == SUMMARY_COLUMNS
    assert tuple(reg_rows[0]) == REGRESSION_COLUMNS
    assert len(summary_rows) - 1 == 33 and len(reg_rows) - 1 == 33
    assert [r[0] for r in summary_rows[1::3]] == [c.slug for c in STANDARD_CRITERIA]
    var_i, cvar_i = SUMMARY_COLUMNS.index("var95"), SUMMARY_COLUMNS.index("cvar95")
    assert all(float(r[cvar_i]) >= float(r[var_i]) for r in summary_rows[1:])
    assert len(list(out.glob("cumret_*.csv"))) == 11
    record_property("detail", "33 summary rows, 33 regression rows, cvar95 >= var95 on all rows")


def test_ac7_wealth_identity(default_run, record_property):
    data, out = default_run
    panel = load_bars(data["bars"])
    cal = load_membership(data["membership"], panel.dates)
    printed = _read(out / "summary_stats.csv")[1:]
    rows = []
    for crit in STANDARD_CRITERIA:
        series, _ = run_strategy(StrategySpec(6, 6, crit), panel, cal)
        rows += performance_rows(crit.slug, series, Mode.CONTRARIAN)
    # the in-memory rows are exactly the ones serialized
    assert [r.cells() for r in rows] == printed
    worst = max(abs(r.stats.fin_wealth * 100 - r.stats.mean * r.stats.n) for r in rows)
    record_property("detail", f"{len(rows)} rows, worst |fin_wealth*100 - mean*n| = {worst:.1e}")
    assert worst <= 1e-8


def test_ac8_determinism(default_run, tmp_path, record_property):
    data, reference = default_run
    outs = {}
    for jobs in ("1", "0", "11"):
        out = tmp_path / f"jobs{jobs}"
        assert main(["--bars", str(data["bars"]), "--membership", str(data["membership"]),
                     "--factors", str(data["factors"]), "--out", str(out), "--jobs", jobs]) == 0
        outs[jobs] = {p.name: p.read_bytes() for p in sorted(Path(out).iterdir())}
    ref = {p.name: p.read_bytes() for p in sorted(reference.iterdir())}
    assert outs["1"] == outs["0"] == outs["11"] == ref
    record_property("detail", f"{len(ref)} files byte-identical for jobs=1, jobs=0 (all cores) and jobs=11")
