"""Command-line entry point: ``physmom run | validate | synth``.

Configuration comes from an optional ``key = value`` file (``--config``);
command-line flags override file values. Exit codes: 0 ok, 2 config error,
3 data error, 4 compute error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import ConfigError, PhysMomError
from .marketdata import (BAR_COLUMNS, FACTOR_COLUMNS, FREQUENCIES, MEMBERSHIP_COLUMNS, calendar_from_panel,
                         load_bars, load_factors, load_membership, to_day)
from .momentum import STANDARD_CRITERIA, CriterionSpec, compute_scores, parse_criterion, write_scores_csv
from .portfolio import Mode, StrategySpec, run_strategy
from .report import (REGRESSION_COLUMNS, SUMMARY_COLUMNS, performance_rows, regression_rows, write_audit,
                     write_cumret, write_rows)

log = logging.getLogger("physmom")


@dataclass
class RunConfig:
    bars_path: str | None = None
    membership_path: str | None = None
    factors_path: str | None = None
    J: int = 6
    K: int = 6
    frequency: str = "weekly"
    n_groups: int = 10
    mode: str = "contrarian"
    criteria: list[str] = field(default_factory=lambda: ["all"])
    cost_winner: float = 0.0
    cost_loser: float = 0.0
    out_dir: str = "out"
    date_from: str | None = None
    date_to: str | None = None
    jobs: int = 1
    dump_scores: bool = False
    universe_hint: int | None = None

    def criterion_specs(self) -> list[CriterionSpec]:
        if [c.strip() for c in self.criteria] == ["all"]:
            return list(STANDARD_CRITERIA)
        return [parse_criterion(c) for c in self.criteria]

    def echo(self) -> dict:
        """Config as recorded in the manifest (execution-only settings omitted)."""
        d = dataclasses.asdict(self)
        for k in ("out_dir", "jobs"):
            d.pop(k)
        d["criteria"] = [c.slug for c in self.criterion_specs()]
        return d


# config-file key -> (RunConfig attribute, converter)
_KEYS = {
    "bars": ("bars_path", str),
    "membership": ("membership_path", str),
    "factors": ("factors_path", str),
    "lookback": ("J", int),
    "hold": ("K", int),
    "freq": ("frequency", str),
    "groups": ("n_groups", int),
    "mode": ("mode", str),
    "criteria": ("criteria", lambda s: [c for c in s.split(",") if c.strip()]),
    "cost_winner": ("cost_winner", float),
    "cost_loser": ("cost_loser", float),
    "from": ("date_from", str),
    "to": ("date_to", str),
    "out": ("out_dir", str),
    "jobs": ("jobs", int),
    "dump_scores": ("dump_scores", lambda s: s.strip().lower() in ("1", "true", "yes")),
    "universe_hint": ("universe_hint", int),
}


def read_config_file(path) -> dict:
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        attr, conv = _KEYS[key]
        try:
            values[attr] = conv(value)
        except ValueError:
            raise ConfigError(f"{path}:{n}: bad value for {key}: {value!r}") from None
    return values


def _header(path) -> list[str] | None:
    try:
        with open(path, encoding="utf-8") as fh:
            return [h.strip() for h in fh.readline().strip().split(",")]
    except OSError:
        return None


def validate(config: RunConfig) -> list[tuple[str, str]]:
    """Static checks; returns ``(level, message)`` pairs with level ``error`` or ``warning``."""
    issues: list[tuple[str, str]] = []

    def err(msg):
        issues.append(("error", msg))

    def warn(msg):
        issues.append(("warning", msg))

    for name, path, columns, required in (
        ("bars", config.bars_path, BAR_COLUMNS, True),
        ("membership", config.membership_path, MEMBERSHIP_COLUMNS, False),
        ("factors", config.factors_path, FACTOR_COLUMNS, False),
    ):
        if path is None:
            if required:
                err(f"{name} file is required")
            continue
        if not Path(path).is_file():
            err(f"{name} file not found: {path}")
            continue
        header = _header(path)
        if header != list(columns):
            err(f"{name} file {path}: expected header {','.join(columns)}, got {header}")
    if config.J < 1:
        err(f"lookback J must be >= 1, got {config.J}")
    if config.K < 1:
        err(f"holding K must be >= 1, got {config.K}")
    if config.frequency not in FREQUENCIES:
        err(f"frequency must be one of {FREQUENCIES}, got {config.frequency!r}")
    if config.n_groups < 2:
        err(f"groups must be >= 2, got {config.n_groups}")
    if config.mode not in {m.value for m in Mode}:
        err(f"mode must be momentum or contrarian, got {config.mode!r}")
    if config.cost_winner < 0 or config.cost_loser < 0:
        err("transaction costs must be >= 0")
    if config.jobs < 0:
        err("jobs must be >= 0")
    try:
        specs = config.criterion_specs()
    except ConfigError as e:
        err(str(e))
        specs = []
    if not specs and not any("criterion" in m for _, m in issues):
        err("no criteria selected")
    for spec in specs:
        problems = spec.problems()
        if problems:
            err(f"illegal criterion combination {spec.slug}: {'; '.join(problems)}")
        elif not spec.is_standard:
            warn(f"{spec.slug} is not one of the eleven standard criteria")
    try:
        lo = to_day(config.date_from) if config.date_from else None
        hi = to_day(config.date_to) if config.date_to else None
        if lo is not None and hi is not None and hi < lo:
            err(f"date range is empty: {config.date_from} .. {config.date_to}")
    except ValueError:
        err(f"bad date range {config.date_from!r} .. {config.date_to!r}")
    if config.universe_hint is not None and config.universe_hint < config.n_groups:
        warn(f"universe of about {config.universe_hint} securities cannot fill {config.n_groups} groups")
    return issues


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load(config: RunConfig):
    panel = load_bars(config.bars_path)
    if config.date_from or config.date_to:
        panel = panel.restrict(config.date_from, config.date_to)
    if config.membership_path:
        cal = load_membership(config.membership_path, panel.dates)
    else:
        cal = calendar_from_panel(panel)
    factors = load_factors(config.factors_path) if config.factors_path else None
    return panel, cal, factors


def _run_one(spec: CriterionSpec, config: RunConfig, panel, cal, factors):
    strategy = StrategySpec(config.J, config.K, spec, Mode(config.mode), config.n_groups,
                            config.cost_winner, config.cost_loser)
    series, cohorts = run_strategy(strategy, panel, cal, config.frequency, audit=True)
    perf = performance_rows(spec.slug, series, strategy.mode)
    regs = regression_rows(spec.slug, series, strategy.mode, factors) if factors is not None else []
    scores = []
    if config.dump_scores:
        for c in cohorts:
            universe = [t for g in c.groups for t in g]
            scores += compute_scores(panel, universe, c.formation, config.J, spec, config.frequency, cal)
    return series, cohorts, perf, regs, scores


def run(config: RunConfig) -> dict:
    """Execute a configured run and write all artifacts. Returns the manifest."""
    errors = [m for level, m in validate(config) if level == "error"]
    if errors:
        raise ConfigError("; ".join(errors))
    specs = config.criterion_specs()
    panel, cal, factors = _load(config)

    jobs = config.jobs or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(lambda s: _run_one(s, config, panel, cal, factors), specs))

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    try:
        names = ["summary_stats.csv"]
        write_rows(staging / "summary_stats.csv", SUMMARY_COLUMNS,
                   (row.cells() for _, _, perf, _, _ in results for row in perf))
        if factors is not None:
            names.append("ff_regression.csv")
            write_rows(staging / "ff_regression.csv", REGRESSION_COLUMNS,
                       (row.cells() for _, _, _, regs, _ in results for row in regs))
        for spec, (series, cohorts, _, _, scores) in zip(specs, results):
            names += [f"cumret_{spec.slug}.csv", f"cohorts_{spec.slug}.csv"]
            write_cumret(staging / f"cumret_{spec.slug}.csv", series, config.mode)
            write_audit(staging / f"cohorts_{spec.slug}.csv", cohorts)
            if config.dump_scores:
                names.append(f"scores_{spec.slug}.csv")
                write_scores_csv(staging / f"scores_{spec.slug}.csv", scores)
        inputs = {name: {"path": str(p), "sha256": _sha256(p)}
                  for name, p in (("bars", config.bars_path), ("membership", config.membership_path),
                                  ("factors", config.factors_path)) if p}
        manifest = {
            "engine": "physmom",
            "version": __version__,
            "config": config.echo(),
            "inputs": inputs,
            "outputs": [{"file": n, "sha256": _sha256(staging / n)} for n in names],
        }
        (staging / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        for n in names + ["manifest.json"]:
            os.replace(staging / n, out / n)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return manifest


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--bars")
    p.add_argument("--membership")
    p.add_argument("--factors")
    p.add_argument("--lookback", type=int, metavar="J")
    p.add_argument("--hold", type=int, metavar="K")
    p.add_argument("--freq", choices=FREQUENCIES)
    p.add_argument("--groups", type=int)
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--criteria", help="comma-separated slugs (p0, p1_turnover_log, ...) or 'all'")
    p.add_argument("--cost-winner", type=float, dest="cost_winner")
    p.add_argument("--cost-loser", type=float, dest="cost_loser")
    p.add_argument("--from", dest="from_")
    p.add_argument("--to")
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, help="parallel criterion runs (0 = all cores)")
    p.add_argument("--dump-scores", action="store_true", default=None, dest="dump_scores")
    p.add_argument("--universe-hint", type=int, dest="universe_hint")


def build_config(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    flags = {"bars": args.bars, "membership": args.membership, "factors": args.factors,
             "lookback": args.lookback, "hold": args.hold, "freq": args.freq, "groups": args.groups,
             "mode": args.mode, "criteria": args.criteria, "cost_winner": args.cost_winner,
             "cost_loser": args.cost_loser, "from": args.from_, "to": args.to, "out": args.out,
             "jobs": args.jobs, "dump_scores": args.dump_scores, "universe_hint": args.universe_hint}
    for key, value in flags.items():
        if value is None:
            continue
        attr, conv = _KEYS[key]
        values[attr] = conv(value) if isinstance(value, str) else value
    return RunConfig(**values)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in ("run", "validate", "synth", "-h", "--help", "--version"):
        argv.insert(0, "run")
    parser = argparse.ArgumentParser(prog="physmom", description="Physical-momentum cross-sectional backtester")
    parser.add_argument("--version", action="version", version=f"physmom {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("run", help="run the backtest and write reports"))
    _add_run_flags(sub.add_parser("validate", help="check a configuration without running"))
    synth = sub.add_parser("synth", help="write a seeded synthetic dataset (bars, membership, factors)")
    synth.add_argument("--out", required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--securities", type=int, default=100)
    synth.add_argument("--days", type=int, default=756)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "synth":
            from .synthetic import generate_market, write_dataset

            paths = write_dataset(generate_market(args.seed, args.securities, args.days), args.out)
            for p in paths.values():
                print(p)
            return 0
        config = build_config(args)
        if args.command == "validate":
            issues = validate(config)
            for level, msg in issues:
                print(f"{level}: {msg}")
            return 2 if any(level == "error" for level, _ in issues) else 0
        manifest = run(config)
        for entry in manifest["outputs"]:
            print(Path(config.out_dir) / entry["file"])
        return 0
    except PhysMomError as e:
        print(f"physmom: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
