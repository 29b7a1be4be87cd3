"""``der-lab run --config <path> [--suite NAME] [--grid N] [--out DIR] [--format json|csv]``."""

from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .fd import RichardsonError
from .geometry import GeometryError, NotPositiveDefinite
from .report import RunReport, emit_report, format_line
from .solver import SolverError
from .suites import DEFAULT_TOLERANCES, RANDOMIZED, RUNNERS, SUITES, SuiteConfig
from .variation import BranchAmbiguity, NotCritical

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_BACKEND = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


_TUPLE_KEYS = {"grids", "sl_grids"}
_ALIASES = {"lambda": "lam"}


def parse_config(data: dict) -> SuiteConfig:
    """Validate a TOML-derived mapping into a :class:`SuiteConfig`."""
    known = {f.name for f in fields(SuiteConfig)}
    kw = {}
    for key, value in data.items():
        key = _ALIASES.get(key, key)
        if key == "output":
            if not isinstance(value, dict):
                raise ConfigError("[output] must be a table")
            if "dir" in value:
                kw["out_dir"] = Path(value["dir"])
            if "format" in value:
                kw["format"] = value["format"]
            continue
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        kw[key] = tuple(value) if key in _TUPLE_KEYS else value
    cfg = SuiteConfig(**kw)
    validate(cfg)
    return cfg


def validate(cfg: SuiteConfig):
    if cfg.suite != "all" and cfg.suite not in SUITES:
        raise ConfigError(f"unknown suite {cfg.suite!r}; choose from {', '.join(SUITES + ('all',))}")
    if cfg.backend not in ("lie", "lattice", "both"):
        raise ConfigError("backend must be 'lie', 'lattice' or 'both'")
    if cfg.format not in ("json", "csv"):
        raise ConfigError("format must be 'json' or 'csv'")
    for key, value in cfg.tolerances.items():
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance {key!r}")
        if not value > 0:
            raise ConfigError(f"tolerance {key!r} must be > 0")
    for g in tuple(cfg.grids) + tuple(cfg.sl_grids) + (cfg.grid,):
        if not isinstance(g, int) or g < 8:
            raise ConfigError("grid sizes must be integers >= 8")
    if cfg.stencil_order not in (2, 4, 6, 8):
        raise ConfigError("stencil_order must be 2, 4, 6 or 8")
    if cfg.samples < 1:
        raise ConfigError("samples must be >= 1")
    names = selected(cfg)
    if cfg.seed is None and RANDOMIZED.intersection(names):
        raise ConfigError(f"a 'seed' is required for randomized suites {sorted(RANDOMIZED.intersection(names))}")
    if cfg.seed is not None and (not isinstance(cfg.seed, int) or cfg.seed < 0):
        raise ConfigError("seed must be a nonnegative integer")


def load_config(path) -> SuiteConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return parse_config(data)


def selected(cfg: SuiteConfig):
    return list(SUITES) if cfg.suite == "all" else [cfg.suite]


def threads() -> int:
    try:
        return max(1, int(os.environ.get("DER_LAB_THREADS", "1")))
    except ValueError:
        return 1


def run_suite(cfg: SuiteConfig) -> RunReport:
    """Run the selected suites (sequentially unless ``cfg.concurrent``) into one report."""
    validate(cfg)
    report = RunReport(cfg.suite, _config_dict(cfg))
    names = selected(cfg)
    t0 = time.perf_counter()
    timings = {}

    def one(name):
        s = time.perf_counter()
        out = RUNNERS[name](cfg)
        timings[name] = time.perf_counter() - s
        return out

    if cfg.concurrent and len(names) > 1:
        with ThreadPoolExecutor(max_workers=threads()) as pool:
            results = list(pool.map(one, names))
    else:
        results = [one(name) for name in names]
    # assembled in suite order regardless of completion order
    for recs, tables in results:
        report.extend(recs, tables)
    report.timestamp = {"utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
                        "wall_time_s": time.perf_counter() - t0,
                        "suite_wall_time_s": {k: timings[k] for k in names}}
    return report


def _config_dict(cfg):
    d = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    d.pop("out_dir")
    d.pop("concurrent")
    d.pop("format")
    d["tolerances"] = {**DEFAULT_TOLERANCES, **cfg.tolerances}
    return d


def build_parser():
    p = argparse.ArgumentParser(prog="der-lab", description="Numerical checks for the Einstein-Dirac energy.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a verification suite")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--suite", choices=SUITES + ("all",))
    r.add_argument("--grid", type=int, help="grid size for single-grid lattice checks")
    r.add_argument("--out", type=Path, help="output directory")
    r.add_argument("--format", choices=("json", "csv"))
    r.add_argument("--concurrent", action="store_true", help="run independent suites concurrently")
    r.add_argument("--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.suite:
            cfg.suite = args.suite
        if args.grid is not None:
            cfg.grid = args.grid
        if args.out is not None:
            cfg.out_dir = args.out
        if args.format:
            cfg.format = args.format
        cfg.concurrent = cfg.concurrent or args.concurrent
        validate(cfg)
    except ConfigError as exc:
        print(f"der-lab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_suite(cfg)
    except NotPositiveDefinite as exc:
        print(f"der-lab: backend construction failed: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (SolverError, RichardsonError, BranchAmbiguity, NotCritical, FloatingPointError,
            ArithmeticError) as exc:
        print(f"der-lab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GeometryError as exc:
        print(f"der-lab: backend construction failed: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    try:
        written = emit_report(report, cfg.out_dir, cfg.format)
    except OSError as exc:
        print(f"der-lab: cannot write report: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        for rec in report.records:
            print(format_line(rec))
        for path in written:
            print(f"wrote {path}")
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
