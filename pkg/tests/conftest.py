import numpy as np
import pytest

from physmom.marketdata import Panel, UniverseCalendar
from physmom.synthetic import generate_market


def make_panel(closes: dict, start="2003-01-06", volume=1e6, shares=1e8, value=5e6, mcap=1e9):
    """Panel from {ticker: [close or None, ...]} on consecutive business days."""
    tickers = sorted(closes)
    T = max(len(v) for v in closes.values())
    days = np.busday_offset(np.datetime64(start, "D"), np.arange(T), roll="forward")
    close = np.full((T, len(tickers)), np.nan)
    for j, t in enumerate(tickers):
        for i, c in enumerate(closes[t]):
            if c is not None:
                close[i, j] = c
    fill = lambda v: np.where(np.isnan(close), np.nan, v)
    return Panel(days, tickers, close, fill(volume), fill(shares), fill(value), fill(mcap))


def full_calendar(panel: Panel) -> UniverseCalendar:
    return UniverseCalendar({t: ((panel.dates[0].item(), None),) for t in panel.tickers}, panel.dates)


@pytest.fixture(scope="session")
def market():
    return generate_market(7, n_securities=80, n_days=400)


_acceptance: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_ac" not in report.nodeid:
        return
    name = report.nodeid.split("::test_", 1)[1]
    detail = dict(report.user_properties).get("detail", "")
    if report.when == "call" or report.failed:
        _acceptance[name] = ("PASS" if report.passed else "FAIL", detail or _acceptance.get(name, ("", ""))[1])


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(_acceptance):
        status, detail = _acceptance[name]
        label, _, words = name.partition("_")
        line = f"{label.upper()} {words.replace('_', ' ')}: {status}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
