"""Check records, run reports and their JSON/CSV serialization."""

from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

SCHEMA = "der-lab/1"


@dataclass
class Record:
    """One check. ``passed`` is ``None`` for reported data that assert nothing."""

    name: str
    anchor: str
    analytic: float | None
    oracle: float | None
    rel_error: float | None
    passed: bool | None
    tolerance: float | None = None
    detail: dict = field(default_factory=dict)

    @property
    def is_check(self):
        return self.passed is not None


def check(name, anchor, analytic, oracle, tol, floor=1e-12, rel_error=None, **detail):
    """Record comparing ``analytic`` with ``oracle`` at relative tolerance ``tol``."""
    if rel_error is None:
        rel_error = abs(analytic - oracle) / max(abs(analytic), floor)
    return Record(name, anchor, _num(analytic), _num(oracle), _num(rel_error),
                  bool(rel_error <= tol), tol, _clean(detail))


def bound(name, anchor, value, limit, tol=0.0, **detail):
    """Record asserting ``value <= limit + tol``; ``rel_error`` holds the excess."""
    excess = max(0.0, value - limit)
    return Record(name, anchor, _num(limit), _num(value), _num(excess), bool(excess <= tol), tol,
                  _clean(detail))


def datum(name, anchor, value=None, **detail):
    return Record(name, anchor, None, _num(value), None, None, None, _clean(detail))


@dataclass
class Table:
    """Convergence table: one row per grid, with the fitted order over all rows."""

    name: str
    grids: list
    errors: list
    fitted_order: float

    @classmethod
    def fit(cls, name, grids, errors):
        order = -float(np.polyfit(np.log(grids), np.log(errors), 1)[0])
        return cls(name, [int(g) for g in grids], [float(e) for e in errors], order)

    def rows(self):
        return [{"grid": g, "error": e, "order": self.fitted_order} for g, e in zip(self.grids, self.errors)]


@dataclass
class RunReport:
    suite: str
    config: dict
    records: list = field(default_factory=list)
    tables: list = field(default_factory=list)
    # everything that legitimately differs between identical runs lives here
    timestamp: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records if r.is_check)

    def extend(self, records=(), tables=()):
        self.records.extend(records)
        self.tables.extend(tables)

    def to_dict(self):
        checks = [r for r in self.records if r.is_check]
        return {
            "schema": SCHEMA,
            "suite": self.suite,
            "passed": self.passed,
            "summary": {"checks": len(checks), "failed": sum(not r.passed for r in checks),
                        "data": len(self.records) - len(checks)},
            "config": _clean(self.config),
            "environment": environment(),
            "records": [asdict(r) for r in self.records],
            "tables": [asdict(t) for t in self.tables],
            "timestamp": _clean(self.timestamp),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls(d["suite"], d["config"], [Record(**r) for r in d["records"]],
                   [Table(**t) for t in d["tables"]], d.get("timestamp", {}))


def environment():
    import scipy

    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "machine": platform.machine()}


def to_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=True)


def load_report(path) -> RunReport:
    return RunReport.from_dict(json.loads(Path(path).read_text()))


def emit_report(report: RunReport, out_dir, fmt: str = "json") -> list:
    """Write ``report.json``, or for ``csv`` one file per convergence table plus ``records.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "json":
        p = out / "report.json"
        p.write_text(to_json(report) + "\n")
        written.append(p)
    elif fmt == "csv":
        for t in report.tables:
            p = out / f"{t.name}.csv"
            with p.open("w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=["grid", "error", "order"])
                w.writeheader()
                w.writerows(t.rows())
            written.append(p)
        p = out / "records.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["name", "anchor", "analytic", "oracle", "rel_error", "tolerance", "passed"])
            for r in report.records:
                w.writerow([r.name, r.anchor, r.analytic, r.oracle, r.rel_error, r.tolerance, r.passed])
        written.append(p)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return written


def _num(x):
    if x is None:
        return None
    x = float(np.real(x))
    return x


def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, tuples to lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    if obj is None or isinstance(obj, (str, int)):
        return obj
    return repr(obj)


def format_line(r: Record) -> str:
    status = "DATA" if r.passed is None else ("PASS" if r.passed else "FAIL")
    err = "" if r.rel_error is None or math.isnan(r.rel_error) else f" err={r.rel_error:.3e}"
    val = "" if r.oracle is None else f" value={r.oracle:.12g}"
    return f"[{status}] {r.name}{val}{err}"
