"""Check reports and deterministic file output."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class CheckReport:
    """Outcome of one randomized or swept check.

    Reports merge as a monoid: counts add, ``min_slack`` takes the minimum and
    detail rows concatenate, so batches can be evaluated in any partition.
    """

    name: str
    samples: int = 0
    violations: int = 0
    min_slack: float = float("inf")
    details: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def merge(self, other: CheckReport) -> CheckReport:
        return CheckReport(
            self.name,
            self.samples + other.samples,
            self.violations + other.violations,
            min(self.min_slack, other.min_slack),
            self.details + other.details,
        )

    def summary(self) -> dict:
        return {
            "name": self.name,
            "samples": int(self.samples),
            "violations": int(self.violations),
            "min_slack": _finite_or_none(self.min_slack),
            "ok": self.ok,
        }


def _finite_or_none(x):
    x = float(x)
    return x if math.isfinite(x) else None


def merge_all(name: str, reports) -> CheckReport:
    out = CheckReport(name)
    for r in reports:
        out = out.merge(r)
    out.name = name
    return out


def atomic_write_text(path, text: str) -> None:
    """Write then rename, so readers never see a half-written file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v
